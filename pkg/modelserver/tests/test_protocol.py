import io
import json

import numpy as np

from modelserver.protocol import load_served_model, serve_stream


def run_lines(served, lines):
    reader = io.StringIO("".join(line + "\n" for line in lines))
    writer = io.StringIO()
    handled = serve_stream(served, reader, writer)
    return handled, [json.loads(l) for l in writer.getvalue().splitlines()]


def test_labels_match_in_process_prediction(trained):
    served = load_served_model(trained["models"]["rf"])
    rng = np.random.default_rng(0)
    batch = rng.integers(0, 3, size=(10, served.arity)).tolist()
    _, responses = run_lines(
        served, [json.dumps({"id": 7, "instances": batch})]
    )
    assert responses[0]["id"] == 7
    assert responses[0]["labels"] == served.predict(batch)


def test_responses_preserve_request_order(trained):
    served = load_served_model(trained["models"]["gbt"])
    lines = [
        json.dumps({"id": i, "instances": [[i % 3, 0, 1, 0]]}) for i in range(5)
    ]
    handled, responses = run_lines(served, lines)
    assert handled == 5
    assert [r["id"] for r in responses] == list(range(5))


def test_malformed_line_yields_error_with_sentinel_id(trained):
    served = load_served_model(trained["models"]["rf"])
    _, responses = run_lines(served, ["this is not json"])
    assert responses[0]["id"] == -1
    assert "error" in responses[0]


def test_prediction_failure_reports_the_request_id(trained):
    served = load_served_model(trained["models"]["rf"])
    _, responses = run_lines(
        served, [json.dumps({"id": 3, "instances": [[1, 2]]})]  # wrong arity
    )
    assert responses[0]["id"] == 3
    assert "error" in responses[0]


def test_blank_lines_skipped_and_eof_is_clean(trained):
    served = load_served_model(trained["models"]["rf"])
    handled, responses = run_lines(
        served, ["", json.dumps({"id": 1, "instances": [[0, 0, 0, 0]]}), ""]
    )
    assert handled == 1
    assert len(responses) == 1
