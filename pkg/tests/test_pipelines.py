import numpy as np
import pytest

from proxytd.aggregation import RANK_RULES, agg_mean, rule_score, weights_grofman
from proxytd.core import CATEGORICAL, CONTINUOUS, RANKING, Instance, ProtoPopulation, dist_continuous, to_pairwise
from proxytd.errors import ConfigError, OracleUnavailableError
from proxytd.noisegen import NoiseModelSpec, fault_from_phi, gen_icn, gen_inn
from proxytd.pipelines import (
    MethodSpec,
    run_d_td,
    run_id_td,
    run_ip_td,
    run_method,
    run_oa,
    run_p_td,
    run_ua,
)


def test_ua_examples():
    assert run_ua(Instance(CONTINUOUS, [[0.0], [2.0]])).z_hat.tolist() == [1.0]
    assert run_ua(Instance(CATEGORICAL, [[0], [0], [1]], k=2)).z_hat.tolist() == [0]
    rng = np.random.default_rng(0)
    R = np.array([rng.permutation(4) for _ in range(7)])
    inst = Instance(RANKING, to_pairwise(R), rankings=R)
    from proxytd.noisegen import child_seed

    expected = rule_score("borda", inst.answers, None, child_seed(3, 1), R)
    assert np.array_equal(run_ua(inst, "borda", 3).z_hat, expected)


def test_oa_weights():
    f = np.array([0.1, 0.4, 0.4])
    inst = Instance(CATEGORICAL, [[1, 0], [0, 1], [0, 1]], truth=[1, 0], k=2, faults=f)
    res = run_oa(inst)
    np.testing.assert_allclose(res.weights.weights, weights_grofman(f, 2).weights)
    # log 9 > 2 log 1.5, so the reliable worker wins both questions
    assert res.z_hat.tolist() == [1, 0] and res.error == 0

    cont = gen_inn(np.zeros(6), [0.5, 1.0, 2.0], 1)
    res = run_oa(cont)
    np.testing.assert_allclose(res.weights.weights, [2.0, 1.0, 0.5])
    np.testing.assert_allclose(res.z_hat, agg_mean(cont.answers, [2.0, 1.0, 0.5]))


def test_oa_empirical_and_unavailable():
    inst = Instance(CONTINUOUS, [[0.0, 1.0], [1.0, 1.0]], truth=[0.0, 1.0])
    res = run_oa(inst)
    assert res.f_hat.values.tolist() == [0.0, 0.5]
    with pytest.raises(OracleUnavailableError):
        run_oa(Instance(CONTINUOUS, [[0.0], [1.0]]))


def test_oa_mallows_uses_fault_from_phi():
    spec = NoiseModelSpec("Mallows", ProtoPopulation("uniform", (0.3, 1.5)), 4)
    inst = spec.generate(10, 3)
    res = run_oa(inst, "borda", 0)
    expected = weights_grofman(fault_from_phi(inst.phis), 2, clip_negative=True).weights
    np.testing.assert_allclose(res.weights.weights, expected)


def test_p_td_equals_d_td_continuous():
    # proportional estimates give proportional weights unless the eps clamp bites
    rng = np.random.default_rng(1)
    checked = 0
    for _ in range(100):
        n, m = rng.integers(3, 21), rng.integers(1, 11)
        inst = Instance(CONTINUOUS, rng.normal(size=(n, m)) * 2, truth=np.zeros(m))
        a = run_p_td(inst, "1/(n-1)")
        b = run_d_td(inst)
        if a.weights.clamped.any() or b.weights.clamped.any():
            continue
        checked += 1
        np.testing.assert_allclose(a.z_hat, b.z_hat, rtol=1e-9, atol=1e-12)
    assert checked >= 90


@pytest.mark.parametrize("method", ["UA", "OA", "D-TD", "P-TD", "ID-TD", "IP-TD"])
def test_unanimous_instances(method):
    cat = Instance(CATEGORICAL, np.tile([1, 0, 2], (5, 1)), truth=[1, 0, 2], k=3)
    R = np.tile([2, 0, 3, 1], (5, 1))
    rank = Instance(RANKING, to_pairwise(R), truth=R[0], rankings=R)
    for inst in (cat, rank):
        res = run_method(inst, MethodSpec(method), 4)
        assert res.error == 0
    if method not in ("ID-TD", "IP-TD"):
        cont = Instance(CONTINUOUS, np.tile([1.5, -2.0], (4, 1)), truth=[1.5, -2.0])
        assert run_method(cont, MethodSpec(method), 4).error == 0


def test_iterative_methods_reject_continuous():
    inst = Instance(CONTINUOUS, [[0.0], [1.0]])
    with pytest.raises(ConfigError):
        run_method(inst, MethodSpec("IP-TD"))
    with pytest.raises(ConfigError):
        run_method(inst, MethodSpec("UA", rule="borda"))


def test_ier_method_ordering():
    spec = NoiseModelSpec("IER", ProtoPopulation("normal", (0.45, 0.1), (0, 1)), 50, 2, "uniform")
    errs = {m: [] for m in ("UA", "OA", "P-TD", "IP-TD")}
    for rep in range(300):
        inst = spec.generate(40, [11, rep])
        for m in errs:
            errs[m].append(run_method(inst, MethodSpec(m), [11, rep]).error)
    mean = {m: np.mean(v) for m, v in errs.items()}
    assert mean["OA"] <= mean["UA"]
    assert mean["P-TD"] < mean["UA"]
    assert mean["IP-TD"] <= mean["P-TD"] + 0.005


def test_iterative_t1_identities():
    spec = NoiseModelSpec("IER", ProtoPopulation("uniform", (0.1, 0.6), (0, 1)), 15, 3)
    for rep in range(20):
        inst = spec.generate(9, rep)
        assert np.array_equal(run_id_td(inst, 1, seed=rep).z_hat, run_d_td(inst, seed=rep).z_hat)
        assert np.array_equal(run_ip_td(inst, 1, seed=rep).z_hat, run_p_td(inst, 0, seed=rep).z_hat)


@pytest.mark.parametrize("rule", RANK_RULES)
def test_rank_rules_on_cyclic_icn_answers(rule):
    inst = gen_icn(np.arange(4), np.full(12, 0.35), 2)
    for method in ("UA", "OA", "D-TD", "P-TD", "IP-TD", "ID-TD"):
        a = run_method(inst, MethodSpec(method, rule), 9)
        b = run_method(inst, MethodSpec(method, rule), 9)
        assert np.array_equal(a.z_hat, b.z_hat)
        assert sorted(a.z_hat.tolist()) == [0, 1, 2, 3]
        assert 0 <= a.error <= 1


def test_noisy_estimates_cost_grows_with_perturbation():
    # weighted mean with f_hat = f (1 + delta xi) versus the oracle weights
    rng = np.random.default_rng(12)
    deltas = (0.05, 0.1, 0.2)
    excess = np.zeros(len(deltas))
    for _ in range(2000):
        f = rng.uniform(0.2, 3.0, 20)
        inst = gen_inn(np.zeros(20), f, rng)
        xi = rng.uniform(-1, 1, 20)
        base = dist_continuous(agg_mean(inst.answers, 1 / f), inst.truth)
        for j, d in enumerate(deltas):
            z_hat = agg_mean(inst.answers, 1 / (f * (1 + d * xi)))
            excess[j] += dist_continuous(z_hat, inst.truth) - base
    excess /= 2000
    print("mean excess error by delta:", dict(zip(deltas, excess.round(6))))
    assert np.all(np.diff(excess) > 0)


def test_method_spec_and_rows():
    spec = MethodSpec("P-TD", "veto", "1/n")
    assert spec.name == "1/n-P-TD[veto]"
    assert MethodSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ConfigError):
        MethodSpec("XX")
    with pytest.raises(ConfigError):
        MethodSpec("ID-TD", T=0)
    inst = Instance(CATEGORICAL, [[0, 1], [0, 1], [1, 1]], truth=[0, 1], k=2)
    row = run_method(inst, MethodSpec("D-TD"), [3, 4]).to_row()
    assert list(row) == ["method", "u", "T", "rule", "n", "m_or_c", "error", "seed"]
    assert row["seed"] == "3-4" and row["n"] == 3 and row["m_or_c"] == 2
    assert run_method(Instance(CATEGORICAL, [[0], [1]], k=2), MethodSpec("UA")).error is None
