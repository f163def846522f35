import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from advise_wear.errors import InvalidInputError, MetricsFileError
from advise_wear.experiment import EpisodeMetrics
from advise_wear.metrics import (
    compare_arms,
    compare_rows,
    emit_csv,
    header,
    pooled_se,
    read_csv,
    smoothed_curve,
)


def row(arm="FixedLow", seed=0, ep=0, reward=-1.0, err=0.3, power=9.6, cons=None):
    return EpisodeMetrics(arm, seed, ep, reward, err, power, cons)


def test_empty_stream_header_only(tmp_path):
    p = tmp_path / "e.csv"
    assert emit_csv([], p, 2) == 0
    assert p.read_text() == ",".join(header(2)) + "\n"
    assert p.read_text().startswith("arm,seed,episode,reward,error_rate,power_mC,consistency_t0")


def test_row_count_and_empty_consistency(tmp_path):
    p = tmp_path / "r.csv"
    rows = [row(seed=s, ep=e) for s in range(2) for e in range(3)]
    assert emit_csv(rows, p, 2) == 6
    lines = p.read_text().splitlines()
    assert len(lines) == 7
    assert lines[1] == "FixedLow,0,0,-1,0.3,9.6,,"


def test_six_significant_digits(tmp_path):
    p = tmp_path / "d.csv"
    emit_csv([row(arm="MultiTrainers", reward=-1.23456789, cons=(0.987654321,))], p)
    assert p.read_text().splitlines()[1] == "MultiTrainers,0,0,-1.23457,0.3,9.6,0.987654"


def test_io_error_has_path(tmp_path):
    bad = tmp_path / "missing" / "x.csv"
    with pytest.raises(MetricsFileError) as info:
        emit_csv([], bad)
    assert str(bad) in str(info.value)
    with pytest.raises(MetricsFileError):
        read_csv(bad)


def test_mismatched_consistency_count(tmp_path):
    with pytest.raises(InvalidInputError):
        emit_csv([row(cons=(0.5,))], tmp_path / "x.csv", 2)


def _six(x):
    return float(format(x, ".6g"))


values = st.floats(-1e6, 1e6, allow_nan=False)


@pytest.mark.invariant
@given(
    st.lists(
        st.tuples(
            st.sampled_from(["MultiTrainers", "PlainQL"]), st.integers(0, 9), st.integers(0, 5000),
            values, st.floats(0, 1), st.floats(0, 100),
            st.tuples(st.floats(1e-6, 1), st.floats(1e-6, 1)),
        ),
        max_size=20,
    )
)
def test_csv_round_trip(tmp_path_factory, recs):
    rows = [
        EpisodeMetrics(a, s, e, r, er, p, c if a == "MultiTrainers" else None)
        for a, s, e, r, er, p, c in recs
    ]
    path = tmp_path_factory.mktemp("rt") / "m.csv"
    emit_csv(rows, path, 2)
    _, back = read_csv(path)
    expected = [
        EpisodeMetrics(
            r.arm, r.seed, r.episode, _six(r.reward), _six(r.error_rate), _six(r.power_mC),
            None if r.consistency is None else tuple(_six(c) for c in r.consistency),
        )
        for r in rows
    ]
    assert back == expected
    # values already at 6 digits survive exactly
    path2 = path.with_name("m2.csv")
    emit_csv(back, path2, 2)
    assert read_csv(path2)[1] == back
    assert path2.read_bytes() == path.read_bytes()


def test_compare_identical_inputs(tmp_path):
    a = [row(arm="PlainQL", ep=e, reward=-1 - 0.1 * (e % 3)) for e in range(10)]
    b = [row(arm="RandomPolicy", ep=e, reward=-1 - 0.1 * (e % 3)) for e in range(10)]
    emit_csv(a, tmp_path / "a.csv", 0)
    emit_csv(b, tmp_path / "b.csv", 0)
    rep = compare_arms([tmp_path / "a.csv", tmp_path / "b.csv"], window=5)
    assert all(p.diff == 0.0 for p in rep.pairwise)
    assert all(p.relation == "~" for p in rep.pairwise)


def test_compare_orders_arms(tmp_path):
    rows = [row(arm="A", ep=e, reward=-1.0) for e in range(5)]
    rows += [row(arm="B", ep=e, reward=-2.0) for e in range(5)]
    emit_csv(rows, tmp_path / "ab.csv", 0)
    rep = compare_arms([tmp_path / "ab.csv"], window=5)
    assert rep.pair("reward", "A", "B").relation == ">"
    assert rep.pair("reward", "B", "A").relation == "<"
    assert rep.ranking("reward") == ["A", "B"]
    assert "A > B" in rep.render()


def test_compare_uses_final_window_only():
    rows = [row(arm="A", ep=e, reward=-100.0 if e < 5 else -1.0) for e in range(10)]
    rows += [row(arm="B", ep=e, reward=-2.0) for e in range(10)]
    rep = compare_rows(rows, 5)
    assert rep.summary("A", "reward").mean == -1.0
    assert rep.summary("A", "reward").n == 5


def test_compare_rejects_schema_mismatch_and_single_arm(tmp_path):
    emit_csv([row(arm="MultiTrainers", cons=(0.5, 0.5))], tmp_path / "two.csv", 2)
    emit_csv([row(arm="PlainQL")], tmp_path / "zero.csv", 0)
    with pytest.raises(InvalidInputError):
        compare_arms([tmp_path / "two.csv", tmp_path / "zero.csv"])
    with pytest.raises(InvalidInputError):
        compare_arms([tmp_path / "zero.csv"])
    (tmp_path / "junk.csv").write_text("a,b\n1,2\n")
    with pytest.raises(MetricsFileError):
        compare_arms([tmp_path / "junk.csv", tmp_path / "zero.csv"])


def test_pooled_se_matches_textbook():
    rng = np.random.default_rng(0)
    a, b = rng.normal(0, 1, 40), rng.normal(1, 2, 60)
    sp2 = ((len(a) - 1) * a.var(ddof=1) + (len(b) - 1) * b.var(ddof=1)) / (len(a) + len(b) - 2)
    assert pooled_se(a, b) == pytest.approx(math.sqrt(sp2 * (1 / 40 + 1 / 60)), rel=1e-12)


def test_smoothed_curve_trailing_mean():
    rows = [row(arm="A", seed=s, ep=e, reward=float(e + s)) for s in (0, 2) for e in range(6)]
    curve = smoothed_curve(rows, "A", "reward", 3)
    seed_mean = np.arange(6) + 1.0
    expected = [seed_mean[max(0, i - 2):i + 1].mean() for i in range(6)]
    assert curve == pytest.approx(expected)
