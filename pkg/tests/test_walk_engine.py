import numpy as np
import pytest

from loopwalk.linalg_core import random_unitary
from loopwalk.optics import full_coin, hwp_matrix, qwp_matrix
from loopwalk.walk_engine import (
    CoinProgram,
    ElementCoin,
    ProgramError,
    RawCoin,
    apply_coin,
    apply_step,
    constant_program,
    effective_2d_evolve,
    evolve,
    final_state,
    make_initial,
    trace_intensities,
)

import oracles

MINUS_IX = -1j * oracles.PAULI_X


def norm(state):
    return sum(float(np.vdot(v, v).real) for v in state.values())


def random_state(rng, width=5, slots=7):
    state = {}
    for x in rng.choice(np.arange(-width, width + 1), size=slots, replace=False):
        state[int(x)] = rng.normal(size=4) + 1j * rng.normal(size=4)
    total = np.sqrt(norm(state))
    return {x: v / total for x, v in state.items()}


def test_make_initial_basis():
    s = make_initial("ccw", "V", 0)
    assert set(s) == {0}
    assert np.array_equal(s[0], np.array([0, 0, 0, 1], dtype=complex))

    s = make_initial("cw", "H", 3)
    assert np.array_equal(s[3], np.array([1, 0, 0, 0], dtype=complex))

    d = make_initial("ccw", "D", 0)[0]
    assert np.max(np.abs(d - np.array([0, 0, 1, 1]) / oracles.SQ2)) < 1e-15

    a = make_initial("ccw", "A", 0)[0]
    assert np.max(np.abs(a - np.array([0, 0, 1, -1]) / oracles.SQ2)) < 1e-15


def test_make_initial_rejects_bad_labels():
    with pytest.raises(ValueError):
        make_initial("up", "H", 0)
    with pytest.raises(ValueError):
        make_initial("cw", "L", 0)


def test_apply_step_single_modes():
    moved = apply_step({0: np.array([1, 0, 0, 0], dtype=complex)})
    assert set(moved) == {-1}
    assert np.array_equal(moved[-1], np.array([0, 0, 1, 0], dtype=complex))

    moved = apply_step({5: np.array([0, 0, 0, 1], dtype=complex)})
    assert set(moved) == {4}
    assert np.array_equal(moved[4], np.array([0, 1, 0, 0], dtype=complex))

    moved = apply_step({2: np.array([0, 1, 0, 0], dtype=complex)})
    assert set(moved) == {3}
    assert np.array_equal(moved[3], np.array([0, 0, 0, 1], dtype=complex))

    moved = apply_step({0: np.array([0, 0, 1, 0], dtype=complex)})
    assert set(moved) == {1}
    assert np.array_equal(moved[1], np.array([1, 0, 0, 0], dtype=complex))


def test_apply_step_is_involution():
    rng = np.random.default_rng(30)
    for _ in range(100):
        state = random_state(rng)
        back = apply_step(apply_step(state))
        assert set(back) == set(state)
        for x in state:
            assert np.max(np.abs(back[x] - state[x])) == 0.0


def test_apply_coin_identity_and_translation_invariance():
    rng = np.random.default_rng(31)
    state = random_state(rng)
    same = apply_coin(state, constant_program(np.eye(4)), 0)
    for x in state:
        assert np.max(np.abs(same[x] - state[x])) == 0.0

    u = random_unitary(4, rng)
    coined = apply_coin(state, constant_program(u), 7)
    for x in state:
        assert np.max(np.abs(coined[x] - u @ state[x])) < 1e-15


def test_apply_coin_unresolvable_names_position():
    program = CoinProgram(default=None, overrides={0: RawCoin(np.eye(4))})
    state = {0: np.array([1, 0, 0, 0], dtype=complex) / np.sqrt(2),
             4: np.array([1, 0, 0, 0], dtype=complex) / np.sqrt(2)}
    with pytest.raises(ProgramError) as err:
        apply_coin(state, program, 2)
    assert "4" in str(err.value)
    assert "2" in str(err.value)


def test_evolve_zero_steps():
    init = make_initial("ccw", "H", 0)
    rec = evolve(init, constant_program(np.eye(4)), 0)
    assert rec.num_steps == 0
    assert len(rec) == 1
    assert rec.intensity(0) == {0: pytest.approx([0, 0, 1, 0])}


def test_evolve_matches_dense_oracle():
    rng = np.random.default_rng(32)
    for _ in range(6):
        coin = random_unitary(4, rng)
        init = make_initial("ccw", "D", 0)
        rec = evolve(init, constant_program(coin), 8)
        expected = oracles.dense_evolve(init, coin, 8)
        got = rec.intensity(8)
        for x, amps in expected.items():
            want = np.abs(amps) ** 2
            have = got.get(x, np.zeros(4))
            assert np.max(np.abs(have - want)) < 1e-12
        for x in got:
            assert x in expected or np.max(np.abs(got[x])) < 1e-12


def test_norm_conservation_long_run():
    rng = np.random.default_rng(33)
    coin = random_unitary(4, rng)
    rec = evolve(make_initial("cw", "D", 0), constant_program(coin), 50)
    for t in range(51):
        assert abs(rec.total(t) - 1.0) < 1e-10


def test_hadamard_configuration_stays_counterclockwise():
    coin = full_coin(MINUS_IX, MINUS_IX, hwp_matrix(22.5))
    rec = evolve(make_initial("ccw", "H", 0), constant_program(coin), 20)
    for t in range(21):
        for v in rec.intensity(t).values():
            assert float(np.max(v[:2])) <= 1e-14


def test_invariant_subspace_any_loop_block():
    # the swap arms confine a counterclockwise start for any loop element
    rng = np.random.default_rng(34)
    for _ in range(5):
        coin = full_coin(MINUS_IX, MINUS_IX, random_unitary(2, rng))
        rec = evolve(make_initial("ccw", "D", 0), constant_program(coin), 15)
        for t in range(16):
            for v in rec.intensity(t).values():
                assert float(np.max(v[:2])) <= 1e-14


def test_hadamard_configuration_matches_effective_walk():
    coin = full_coin(MINUS_IX, MINUS_IX, hwp_matrix(22.5))
    rec = evolve(make_initial("ccw", "H", 0), constant_program(coin), 25)
    eff = effective_2d_evolve({0: np.array([0, 1], dtype=complex)}, oracles.HADAMARD_2, 25)
    for t in range(26):
        walk_pd = rec.position_distribution(t)
        eff_pd = {x: float(v.sum()) for x, v in eff[t].items()}
        for x in set(walk_pd) | set(eff_pd):
            assert abs(walk_pd.get(x, 0.0) - eff_pd.get(x, 0.0)) < 1e-12


def test_effective_2d_single_step_hadamard():
    out = effective_2d_evolve({0: np.array([1, 0], dtype=complex)}, oracles.HADAMARD_2, 1)
    table = out[1]
    assert set(table) == {-1, 1}
    assert abs(table[1][0] - 0.5) < 1e-15
    assert abs(table[-1][1] - 0.5) < 1e-15


def test_effective_2d_identity_ballistic():
    out = effective_2d_evolve({0: np.array([1, 0], dtype=complex)}, np.eye(2), 9)
    table = out[9]
    assert set(x for x, v in table.items() if v.sum() > 1e-15) == {9}
    assert abs(table[9].sum() - 1.0) < 1e-12


def test_effective_2d_matches_path_enumeration():
    rng = np.random.default_rng(35)
    for _ in range(4):
        coin2 = random_unitary(2, rng)
        init = {0: np.array([1, 1j], dtype=complex) / oracles.SQ2}
        out = effective_2d_evolve(init, coin2, 10)
        for t in (3, 7, 10):
            expected = oracles.path_enumeration_2d(init, coin2, t)
            got = {x: v for x, v in out[t].items()}
            for x in set(expected) | set(got):
                want = expected.get(x, np.zeros(2))
                have = got.get(x, np.zeros(2))
                assert np.max(np.abs(have - want)) < 1e-12


def test_partial_reversal_sums_to_hadamard_walk():
    q0 = qwp_matrix(0.0)
    coin = full_coin(MINUS_IX, q0 @ q0, hwp_matrix(22.5))
    rec = evolve(make_initial("ccw", "A", 0), constant_program(coin), 22)
    eff_init = {0: np.array([1, -1], dtype=complex) / oracles.SQ2}
    eff = effective_2d_evolve(eff_init, oracles.HADAMARD_2, 22)
    for t in range(23):
        walk_pd = rec.position_distribution(t)
        eff_pd = {x: float(v.sum()) for x, v in eff[t].items()}
        for x in set(walk_pd) | set(eff_pd):
            assert abs(walk_pd.get(x, 0.0) - eff_pd.get(x, 0.0)) < 1e-10


def test_trace_intensities_modes():
    coin = oracles.BALANCED_FOUR_MODE_COIN
    rec = evolve(make_initial("ccw", "D", 0), constant_program(coin), 6)

    full = trace_intensities(rec, "full")
    pol = trace_intensities(rec, "sum_polarization")
    direc = trace_intensities(rec, "sum_direction")
    total = trace_intensities(rec, "sum_all")

    for t in range(7):
        assert abs(sum(full[t].values()) - 1.0) < 1e-10
        assert abs(sum(pol[t].values()) - 1.0) < 1e-10
        assert abs(sum(direc[t].values()) - 1.0) < 1e-10
        assert abs(sum(total[t].values()) - 1.0) < 1e-10

    assert all(isinstance(k, tuple) and k[1] in ("cH", "cV", "ccH", "ccV") for k in full[2])
    assert all(k[1] in ("c", "cc") for k in pol[2])
    assert all(k[1] in ("H", "V") for k in direc[2])
    assert all(isinstance(k, int) for k in total[2])

    with pytest.raises(ValueError):
        trace_intensities(rec, "sideways")


def test_parity_of_occupied_sites():
    rng = np.random.default_rng(36)
    coin = random_unitary(4, rng)
    rec = evolve(make_initial("cw", "V", 0), constant_program(coin), 16)
    for t in range(17):
        for x, v in rec.intensity(t).items():
            if (x + t) % 2 == 1:
                assert float(np.max(v)) <= 1e-14


def test_final_state_consistent_with_record():
    rng = np.random.default_rng(37)
    coin = random_unitary(4, rng)
    init = make_initial("ccw", "D", 0)
    rec = evolve(init, constant_program(coin), 9)
    last = final_state(init, constant_program(coin), 9)
    for x, v in last.items():
        assert np.max(np.abs(np.abs(v) ** 2 - rec.intensity(9).get(x, np.zeros(4)))) < 1e-13


def test_intensity_record_helpers():
    coin = oracles.BALANCED_FOUR_MODE_COIN
    rec = evolve(make_initial("ccw", "H", 0), constant_program(coin), 4)
    assert rec.num_steps == 4
    assert len(rec) == 5
    assert rec.positions(0) == [0]
    assert sorted(rec.positions(1)) == rec.positions(1)
    pd = rec.position_distribution(2)
    assert abs(sum(pd.values()) - 1.0) < 1e-10
    assert abs(rec.total(3) - 1.0) < 1e-10


def test_raw_coin_cannot_be_perturbed():
    rng = np.random.default_rng(38)
    raw = RawCoin(np.eye(4))
    with pytest.raises(ValueError):
        raw.perturbed(rng, 1.0, "uniform")
    assert not raw.has_elements


def test_element_coin_angles_roundtrip():
    from loopwalk.optics import ArmSetting, OpticalElement

    coin = ElementCoin(
        arm_a=ArmSetting((OpticalElement("qwp", 45.0),)),
        arm_b=ArmSetting((OpticalElement("qwp", 45.0),), eom_phase_deg=-90.0),
        loop=(OpticalElement("hwp", 22.5),),
    )
    assert coin.angles() == [45.0, 0.0, 45.0, -90.0, 22.5]
    assert coin.has_elements

    rebuilt = coin.with_angles(coin.angles())
    assert np.max(np.abs(rebuilt.matrix() - coin.matrix())) == 0.0
    shifted = coin.with_angles([46.0, 0.0, 45.0, -90.0, 22.5])
    assert np.max(np.abs(shifted.matrix() - coin.matrix())) > 1e-3
    with pytest.raises(ValueError):
        coin.with_angles([1.0, 2.0])


def test_element_coin_perturbation_stays_bounded():
    from loopwalk.optics import ArmSetting, OpticalElement

    coin = ElementCoin(
        arm_a=ArmSetting((OpticalElement("qwp", 45.0),)),
        arm_b=ArmSetting((OpticalElement("qwp", 45.0),)),
        loop=(OpticalElement("hwp", 22.5),),
    )
    rng = np.random.default_rng(41)
    base = np.array(coin.angles())
    for dist in ("uniform", "truncated_normal"):
        for _ in range(25):
            bumped = np.array(coin.perturbed(rng, 0.5, dist).angles())
            assert np.max(np.abs(bumped - base)) <= 0.5


def test_coin_program_time_table_precedence():
    base = RawCoin(np.eye(4))
    special = RawCoin(oracles.BALANCED_FOUR_MODE_COIN)
    t0 = RawCoin(np.diag([1, 1, -1, -1]).astype(complex))
    t1 = RawCoin(np.diag([1, -1, 1, -1]).astype(complex))
    program = CoinProgram(
        default=base,
        overrides={3: special},
        time_table=[t0, t1],
    )
    # steps covered by the table ignore position rules entirely
    assert np.array_equal(program.coin_at(0, 3), np.diag([1, 1, -1, -1]).astype(complex))
    assert np.array_equal(program.coin_at(1, 0), np.diag([1, -1, 1, -1]).astype(complex))
    # past the table, position rules take over again
    assert np.array_equal(program.coin_at(2, 3), oracles.BALANCED_FOUR_MODE_COIN)
    assert np.array_equal(program.coin_at(2, 0), np.eye(4))


def test_coin_program_without_rules_raises():
    program = CoinProgram(default=None)
    with pytest.raises(ProgramError):
        program.spec_at(0, 0)


def test_coin_program_perturbation_draws_are_shared():
    # every site using the same physical element set must get the same draw
    from loopwalk.graph_programs import CircleSpec, circle_program

    spec = CircleSpec(num_sites=8, left_end=-3, flavor="hadamard_like")
    program, _ = circle_program(spec)
    rng = np.random.default_rng(39)
    bumped = program.perturbed(rng, 2.0, "uniform")
    inner_positions = range(spec.left_end + 1, spec.right_end)
    mats = [bumped.coin_at(0, x) for x in inner_positions]
    for m in mats[1:]:
        assert np.max(np.abs(m - mats[0])) == 0.0
    left = bumped.coin_at(0, spec.left_end)
    right = bumped.coin_at(0, spec.right_end)
    assert np.max(np.abs(left - right)) == 0.0
    # the ends were actually jittered away from the ideal setting
    ideal = program.coin_at(0, spec.left_end)
    assert np.max(np.abs(left - ideal)) > 1e-6


def test_coin_program_perturbation_distributions():
    from loopwalk.graph_programs import CircleSpec, circle_program

    program, _ = circle_program(CircleSpec(num_sites=8, left_end=0, flavor="hadamard_like"))
    rng = np.random.default_rng(40)
    for dist in ("uniform", "truncated_normal"):
        bumped = program.perturbed(rng, 1.5, dist)
        assert bumped is not program
        m = bumped.coin_at(0, 1)
        assert np.max(np.abs(m.conj().T @ m - np.eye(4))) < 1e-12
    with pytest.raises(ValueError):
        program.perturbed(rng, 1.5, "gaussian")
