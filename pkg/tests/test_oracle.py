import numpy as np
import pytest
from util import make_problem, transmitted_label

import latdec
from latdec import oracle
from latdec.errors import TooLarge
from latdec.lattice import InfoSet, LatticeCode
from latdec.preprocess import form_tree


def test_exhaustive_ml_noiseless():
    cfg = latdec.VblastConfig(M=2, N=2, Q=2)
    inst = latdec.sample_vblast(cfg, latdec.frame_rng(0, 0), noiseless=True)
    res = oracle.exhaustive_ml(inst)
    assert np.array_equal(res.label, inst.x_true)
    assert res.distance == pytest.approx(0.0, abs=1e-18)


def test_exhaustive_ml_hand_enumeration():
    # m=2, Q=2: check against a literal four-term evaluation
    H = np.array([[1.0, 0.4], [0.0, 0.9]])
    code = LatticeCode(np.eye(2), np.array([-0.5, -0.5]), InfoSet("hypercube", q=2))
    received = np.array([0.35, 0.41])
    inst = latdec.ChannelInstance(H=H, code=code, x_true=np.array([1, 1]),
                                  received=received)
    dists = {}
    for x0 in (0, 1):
        for x1 in (0, 1):
            c = np.array([x0, x1]) + code.translate
            dists[(x0, x1)] = float(np.sum((received - H @ c) ** 2))
    expect = min(dists, key=dists.get)
    res = oracle.exhaustive_ml(inst)
    assert tuple(res.label) == expect
    assert res.distance == pytest.approx(dists[expect])


def test_exhaustive_ml_guard():
    cfg = latdec.VblastConfig(M=16, N=16, Q=4)
    inst = latdec.sample_vblast(cfg, latdec.frame_rng(1, 0))
    with pytest.raises(TooLarge):
        oracle.exhaustive_ml(inst)  # 4^32 candidates


def test_exhaustive_ml_tie_reporting():
    # symmetric received point: both labels at the same distance
    H = np.eye(1)
    code = LatticeCode(np.eye(1), np.array([0.0]), InfoSet("hypercube", q=2))
    inst = latdec.ChannelInstance(H=H, code=code, x_true=np.array([0]),
                                  received=np.array([0.5]))
    res = oracle.exhaustive_ml(inst)
    assert res.tie
    assert tuple(res.label) == (0,)  # lexicographically smallest


def test_exhaustive_matches_se_on_zf_constrained():
    cfg = latdec.VblastConfig(M=2, N=2, Q=2, rho=10.0)
    for i in range(200):
        inst = latdec.sample_vblast(cfg, latdec.frame_rng(2, i))
        prob = form_tree(inst.received, inst.H, inst.code, "zf", "none", "constrained")
        se = latdec.gbb_run(prob, latdec.policy_se())
        ml = oracle.exhaustive_ml(inst)
        assert np.array_equal(transmitted_label(prob, ml.label), se.decoded_label) \
            or se.distance == pytest.approx(ml.distance, abs=1e-9)


def test_box_radius_zero_evaluates_center_only():
    prob = make_problem(np.eye(2), [0.3, -0.2])
    box = oracle.OracleBox(center=np.array([4, 7]), radius=np.array([0, 0]))
    label, dist = oracle.box_clps(prob, box)
    assert label == (4, 7)


def test_box_one_dimensional_example():
    prob = make_problem([[1.0]], [0.4])
    box = oracle.OracleBox(center=np.array([0]), radius=np.array([2]))
    label, dist = oracle.box_clps(prob, box)
    assert label == (0,)
    assert dist == pytest.approx(0.16)


def test_box_clps_agrees_with_stack_on_random_problems():
    count = 0
    for i in range(100):
        m = 1 + i % 4
        cfg = latdec.VblastConfig(M=m, N=m, Q=2, rho=10.0 ** 0.9)
        inst = latdec.sample_vblast(cfg, latdec.frame_rng(3, i))
        prob = form_tree(inst.received, inst.H, inst.code, "mmse", "lll", "lattice")
        try:
            label, dist = oracle.box_clps(prob, oracle.babai_box(prob))
        except TooLarge:
            continue
        st = latdec.gbb_run(prob, latdec.policy_stack(0.0))
        assert st.distance == pytest.approx(dist, abs=1e-9)
        count += 1
    assert count >= 80


def test_constrained_box_oracle_reproduces_ml_decisions():
    # exhaustive search over the boxed tree problem (ZF, no basis change)
    # must agree with direct ML enumeration on every instance
    cfg = latdec.VblastConfig(M=2, N=2, Q=2, rho=10.0 ** 0.8)
    for i in range(100):
        inst = latdec.sample_vblast(cfg, latdec.frame_rng(5, i))
        prob = form_tree(inst.received, inst.H, inst.code, "zf", "none", "constrained")
        box = oracle.OracleBox(center=np.zeros(prob.m, dtype=int),
                               radius=np.full(prob.m, 2))  # clipped to {0,1}
        label, dist = oracle.box_clps(prob, box)
        ml = oracle.exhaustive_ml(inst)
        assert label == transmitted_label(prob, ml.label)
        assert dist == pytest.approx(ml.distance, abs=1e-9)  # square Q: isometry


def test_enumerate_zero_budget_on_noisy_instance_is_empty():
    cfg = latdec.VblastConfig(M=2, N=2, Q=2, rho=10.0)
    inst = latdec.sample_vblast(cfg, latdec.frame_rng(4, 0))
    prob = form_tree(inst.received, inst.H, inst.code, "mmse", "none", "lattice")
    assert oracle.enumerate_node_set(prob, oracle.PohstBudget(0.0)) == set()


def test_enumerate_node_set_guard():
    prob = make_problem(np.eye(2) * 1e-3, [0.0, 0.0])
    with pytest.raises(TooLarge):
        oracle.enumerate_node_set(prob, oracle.PohstBudget(10.0), guard=100)


def test_enumerate_matches_direct_check_small():
    prob = make_problem([[1.0, 0.4], [0.0, 0.8]], [0.3, -0.6])
    C0 = 2.0
    got = oracle.enumerate_node_set(prob, oracle.PohstBudget(C0))
    # independent re-check over a generous integer window
    want = set()
    for x1 in range(-5, 6):
        w1 = prob.path_metric((x1,))
        if w1 <= C0:
            want.add((x1,))
            for x2 in range(-5, 6):
                if prob.path_metric((x1, x2)) <= C0:
                    want.add((x1, x2))
    assert got == want
