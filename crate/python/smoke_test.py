"""Smoke test for the otsynth Python extension.

Build and install first, e.g. `maturin develop --release -m crates/python/Cargo.toml`.
"""

import otsynth


def main():
    raw = otsynth.Spec.load("fig1")
    assert not raw.validate()["complete"]
    spec = raw.complete("to-error")
    report = spec.validate()
    assert report["complete"] and report["deterministic"], report

    analysis = spec.analyze("o", game=True)
    assert analysis["layers"] == [["o"], ["s1"], ["s0"]], analysis["layers"]
    assert analysis["sink"] == ["t"]
    assert analysis["game"]["W"][0] == ["o"]
    assert sorted(analysis["game"]["st_greedy"]["s0"]) == ["10", "11"]

    assert spec.run_trace(["100", "011"]) == ("o", False)

    sut = otsynth.Sut("builtin:passageway:3")
    sut.reset()
    assert sut.step("10") == "100000"
    assert sut.step("01") == "100000"

    assert otsynth.discounted_reward([2], 0.5) == 4.0
    assert abs(otsynth.uct_score(2.0, 2.718281828459045, 1, -1.0) - 1.0) < 1e-9

    pw = otsynth.Spec.load("passageway")
    result = otsynth.run(pw, "room10", "builtin:passageway-bug", "greedy-mcts", attempts=2, seed=3)
    row = result["rows"][0]
    assert row["successes"] == 2, row
    assert result["attempts"][0]["error_traces"], "expected the bug to be revealed"

    print("python smoke test passed:", row["label"], row["success_rate"], row["average_runs"])


if __name__ == "__main__":
    main()
