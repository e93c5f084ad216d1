import dataclasses

import numpy as np
import pytest

from geopfn.context import (
    ContextSpec,
    MissingnessPattern,
    build_imputation,
    build_individual,
    build_simultaneous,
    detect_patterns,
    engineer_patterns,
    view_features,
    withhold_target,
)
from geopfn.errors import ContextError, ContractError
from geopfn.geodata import MECHANICAL_PARAMS, BoreholeRecord, SiteTable


def rec(bh, depth, su=None, **kw):
    defaults = dict(Sr=95.0, gamma_t=16.0, e=1.7, LL=81.0, PL=30.0, w=60.0,
                    Eu=3000.0, sigma_p=100.0, Cc=1.0, cv=100.0)
    defaults.update(kw)
    return BoreholeRecord(site_id="S", borehole_id=bh, x=0.0, y=0.0,
                          depth=float(depth), su=su, **defaults)


def bid_table(n=8):
    return SiteTable([rec("BID-B1", d + 1, su=20.0 + d) for d in range(n)],
                     label="bid")


EMPTY_BID = SiteTable([], label="empty")


# -------------------------------------------------------------- individual


def test_individual_counts_without_bid():
    site = SiteTable([rec("B1", d + 1, su=20.0 if d < 10 else None)
                      for d in range(15)])
    spec = ContextSpec(bid=EMPTY_BID, features=["x", "y", "depth"],
                       target="su", scenario="individual")
    ctask = build_individual(spec, site, "B1")
    assert ctask.task.n_train == 10
    assert ctask.task.n_test == 5
    assert ctask.warning is None


def test_individual_fully_observed_warns():
    site = SiteTable([rec("B1", d + 1, su=20.0) for d in range(5)])
    spec = ContextSpec(bid=bid_table(), features=["x", "y", "depth"],
                       target="su", scenario="individual")
    ctask = build_individual(spec, site, "B1")
    assert ctask.task.n_test == 0
    assert "fully observed" in ctask.warning


def test_individual_unknown_borehole():
    site = SiteTable([rec("B1", 1, su=20.0)])
    spec = ContextSpec(bid=EMPTY_BID, features=["depth"], target="su",
                       scenario="individual")
    with pytest.raises(ContextError, match="B9"):
        build_individual(spec, site, "B9")


def test_leak_freedom_no_test_row_has_target():
    site = SiteTable([rec("B1", d + 1, su=None if d % 2 else 20.0)
                      for d in range(8)])
    spec = ContextSpec(bid=bid_table(), features=["x", "y", "depth"],
                       target="su", scenario="individual")
    ctask = build_individual(spec, site, "B1")
    assert ctask.task.y_test is None
    test_depths = {k[2] for k in ctask.test_keys}
    for r in site.borehole("B1"):
        if r.depth in test_depths:
            assert r.su is None


# ------------------------------------------------------------ simultaneous


def test_simultaneous_equals_union_of_individual_test_sets():
    site = SiteTable([rec(b, d + 1, su=None if (d + i) % 3 == 0 else 20.0 + d)
                      for i, b in enumerate(["B1", "B2", "B3"])
                      for d in range(6)])
    spec_i = ContextSpec(bid=bid_table(), features=["x", "y", "depth"],
                         target="su", scenario="individual")
    union = set()
    for b in ["B1", "B2", "B3"]:
        union |= set(build_individual(spec_i, site, b).test_keys)
    spec_s = ContextSpec(bid=bid_table(), features=["x", "y", "depth"],
                         target="su", scenario="simultaneous")
    ctask = build_simultaneous(spec_s, site, ["B1", "B2", "B3"])
    assert set(ctask.test_keys) == union
    assert ctask.task.n_test == len(union)


def test_simultaneous_adds_borehole_feature():
    site = SiteTable([rec(b, d + 1, su=None if d == 0 else 20.0)
                      for b in ["B1", "B2"] for d in range(4)])
    spec = ContextSpec(bid=bid_table(), features=["x", "y", "depth"],
                       target="su", scenario="simultaneous")
    ctask = build_simultaneous(spec, site, ["B1", "B2"])
    assert ctask.task.n_features == 4
    assert ctask.task.schema[-1] == "categorical"


def test_simultaneous_needs_two_boreholes():
    site = SiteTable([rec("B1", 1, su=None), rec("B1", 2, su=20.0)])
    spec = ContextSpec(bid=bid_table(), features=["depth"], target="su",
                       scenario="simultaneous")
    with pytest.raises(ContractError):
        build_simultaneous(spec, site, ["B1"])


# ---------------------------------------------------------------- patterns


def test_detect_single_pattern():
    recs = [rec("B1", d + 1, su=20.0, Eu=None) for d in range(4)]
    pats = detect_patterns(recs)
    assert len(pats) == 1
    assert pats[0].missing == ("Eu",)
    assert len(pats[0].record_keys) == 4


def test_detect_two_patterns_with_memberships():
    recs = ([rec("B1", d + 1, su=None) for d in range(3)]
            + [rec("B2", d + 1, su=None, Eu=None) for d in range(2)])
    pats = detect_patterns(recs)
    assert [p.missing for p in pats] == [("Eu", "su"), ("su",)]
    assert len(pats[0].record_keys) == 2
    assert len(pats[1].record_keys) == 3


def test_detect_ignores_complete_records():
    assert detect_patterns([rec("B1", 1, su=20.0)]) == []


# -------------------------------------------------------------- imputation


def test_imputation_one_task_per_missing_target():
    recs = [rec("B1", d + 1, su=None, Eu=None, sigma_p=None, Cc=None, cv=None)
            for d in range(3)]
    recs += [rec("B2", d + 1, su=25.0) for d in range(5)]
    pats = detect_patterns(recs)
    assert len(pats) == 1
    assert len(pats[0].missing) == 5
    tasks = [build_imputation(bid_table(), recs, pats[0], t)
             for t in pats[0].missing]
    assert len(tasks) == 5
    for t in tasks:
        assert t.task.n_test == 3


def test_imputation_target_must_be_missing_in_pattern():
    recs = [rec("B1", 1, su=None)]
    pat = detect_patterns(recs)[0]
    with pytest.raises(ContractError):
        build_imputation(bid_table(), recs, pat, "Eu")


def test_imputation_empty_context_error():
    recs = [rec("B1", d + 1, su=None) for d in range(3)]
    pat = detect_patterns(recs)[0]
    empty = SiteTable([], label="empty")
    with pytest.raises(ContextError, match="zero train rows"):
        build_imputation(empty, recs, pat, "su")


# ------------------------------------------------------------ capacity


def test_truncation_subsamples_bid_not_site():
    site = SiteTable([rec("B1", d + 1, su=None if d < 3 else 20.0 + d)
                      for d in range(10)])
    big_bid = SiteTable([rec("BID-B1", d + 1, su=15.0 + 0.1 * d)
                         for d in range(50)], label="big")
    spec = ContextSpec(bid=big_bid, features=["x", "y", "depth"],
                       target="su", scenario="individual")
    ctask = build_individual(spec, site, "B1", max_rows=20, subsample_seed=1)
    assert ctask.task.n_train + ctask.task.n_test <= 20
    assert ctask.task.n_test == 3  # site rows never dropped
    assert ctask.n_bid_rows_used == 20 - 3 - 7
    assert ctask.subsample_seed == 1


def test_truncation_without_seed_is_error():
    site = SiteTable([rec("B1", d + 1, su=None if d == 0 else 20.0)
                      for d in range(5)])
    big_bid = SiteTable([rec("BID-B1", d + 1, su=15.0) for d in range(50)])
    spec = ContextSpec(bid=big_bid, features=["depth"], target="su",
                       scenario="individual")
    with pytest.raises(ContextError, match="seed"):
        build_individual(spec, site, "B1", max_rows=20)


# ----------------------------------------------------------------- helpers


def test_view_features():
    assert view_features("4", "su") == ["x", "y", "depth"]
    v11 = view_features("11", "su")
    assert len(v11) == 13 and "su" not in v11
    with pytest.raises(ContractError):
        view_features("7", "su")


def test_spec_validation():
    with pytest.raises(ContractError):
        ContextSpec(bid=EMPTY_BID, features=["depth", "su"], target="su",
                    scenario="individual").validate()
    with pytest.raises(ContractError):
        MissingnessPattern(missing=(), record_keys=[])


def test_withhold_target_masks_and_keeps_truth():
    site = SiteTable([rec("B1", d + 1, su=20.0 + d) for d in range(10)])
    masked, truth = withhold_target(site, ["B1"], "su", 0.4, seed=0)
    assert len(truth) == 4
    for r in masked:
        if r.key() in truth:
            assert r.su is None
            assert truth[r.key()] == pytest.approx(20.0 + r.depth - 1)
        else:
            assert r.su is not None


def test_engineer_patterns_counts_and_truth():
    recs = [rec("B1", d + 1, su=20.0) for d in range(12)]
    specs = [{"missing": ["su", "Eu"], "n_records": 3},
             {"missing": ["cv"], "n_records": 2}]
    masked, truth = engineer_patterns(recs, specs, seed=0)
    pats = detect_patterns(masked)
    assert sorted(p.missing for p in pats) == [("Eu", "su"), ("cv",)]
    assert len(truth) == 3 * 2 + 2 * 1
    for (key, param), v in truth.items():
        assert v > 0
        assert param in MECHANICAL_PARAMS
