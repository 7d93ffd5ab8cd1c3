import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ghzt.errors import NonPermutation, SizeCapExceeded
from ghzt.protocol import ProtocolConfig, run_protocol
from ghzt.resource import MessageState, Mode, random_message
from ghzt.verify import (
    SignedPermutation,
    branch_averaged_fidelity,
    enumerate_outcomes,
    extract_signed_permutation,
    fidelity_audit,
    regen_table,
    remaining_vector,
    states_match,
    trial_seeds,
    unmeasured_qubits,
    verify_corrections,
)

MSG = MessageState.from_amplitudes([0.6, 0.8])


def withheld_oracle(a: complex, b: complex) -> float:
    """Closed form for m=3, n=1 with c2 withheld.

    Half the branches leave Z|psi> behind, whose fidelity with |psi> is
    (|a|^2 - |b|^2)^2; the other half are perfect.
    """
    return (1 + (abs(a) ** 2 - abs(b) ** 2) ** 2) / 2


# ---------------------------------------------------------------- enumeration


@pytest.mark.parametrize("m,n", [(3, 1), (4, 1), (3, 2), (5, 1)])
def test_branch_count_and_uniform_probability(m, n):
    branches = enumerate_outcomes(ProtocolConfig(m, n), random_message(n, 3), symbolic=False)
    assert len(branches) == 2 ** (m * n)
    probs = np.array([b.probability for b in branches])
    np.testing.assert_allclose(probs, 2.0 ** (-m * n), atol=1e-10)
    assert probs.sum() == pytest.approx(1, abs=1e-10)
    assert [b.bits for b in branches] == sorted(b.bits for b in branches)


def test_four_party_pre_controller_branch():
    cfg = ProtocolConfig(4, 1)
    branches = {b.bits: b for b in enumerate_outcomes(cfg, MSG, stage="pre")}
    assert len(branches) == 4
    perm = branches[(1, 1)].symbolic
    assert perm.render() == "α|111⟩ − β|000⟩"
    # numeric post-state agrees with the symbolic map
    vec = remaining_vector(branches[(1, 1)].post_state, {0: 1, 1: 1}, unmeasured_qubits(cfg, "pre"))
    assert states_match(vec, perm.apply(MSG.amplitudes), 1e-12)


def test_two_qubit_pre_controller_branch():
    cfg = ProtocolConfig(3, 2)
    branches = {b.pattern: b for b in enumerate_outcomes(cfg, random_message(2, 0), stage="pre")}
    assert len(branches) == 16
    want = SignedPermutation.parse("α|0101⟩−β|0000⟩+γ|1111⟩−δ|1010⟩", 2, (4, 5, 6, 7))
    assert branches["0101"].symbolic == want


def test_enumeration_size_cap():
    with pytest.raises(SizeCapExceeded):
        enumerate_outcomes(ProtocolConfig(6, 3), random_message(3, 0))


# ---------------------------------------------------------------- signed permutations


def test_extract_known_rows():
    cfg = ProtocolConfig(3, 1)
    assert extract_signed_permutation(cfg, (1, 1, 0)).render() == "α|1⟩ − β|0⟩"
    ident = extract_signed_permutation(cfg, (0, 0, 0))
    assert ident.targets == (0, 1) and ident.phases == (0, 0)
    assert ident.is_bijection


@pytest.mark.parametrize("m", [3, 4])
def test_minimal_two_qubit_messages_are_not_permutations(m):
    cfg = ProtocolConfig(m, 2, Mode.MINIMAL)
    nbits = cfg.schedule.num_bits
    for pattern in itertools.product((0, 1), repeat=nbits):
        with pytest.raises(NonPermutation):
            extract_signed_permutation(cfg, pattern)


@pytest.mark.parametrize("m,n", [(3, 1), (4, 1), (3, 2), (4, 2), (5, 2)])
def test_standard_never_non_permutation(m, n):
    cfg = ProtocolConfig(m, n)
    for b in enumerate_outcomes(cfg, random_message(n, 1)):
        assert b.symbolic is not None and b.symbolic.is_bijection


@pytest.mark.parametrize(
    "text",
    ["α|00⟩ + β|01⟩ + γ|10⟩ + δ|11⟩", "−α|1⟩ + β|0⟩", "α|0⟩ − iβ|1⟩", "iα|11⟩ − β|10⟩ + γ|01⟩ − δ|00⟩"],
)
def test_render_parse_round_trip(text):
    n = 2 if "γ" in text else 1
    width = len(text.split("|")[1].split("⟩")[0])
    perm = SignedPermutation.parse(text, n, tuple(range(width)))
    assert SignedPermutation.parse(perm.render(), n, perm.qubits) == perm


def test_global_phase_equivalence():
    a = SignedPermutation.parse("α|1⟩−β|0⟩", 1, (0,))
    b = SignedPermutation.parse("−α|1⟩+β|0⟩", 1, (0,))
    c = SignedPermutation.parse("α|1⟩+β|0⟩", 1, (0,))
    assert a.up_to_global_phase(b)
    assert not a.up_to_global_phase(c)


def test_duplicate_targets_rejected():
    with pytest.raises(NonPermutation):
        SignedPermutation(1, (0, 0), (0, 0), (0,))


# ---------------------------------------------------------------- corrections


@pytest.mark.parametrize("m,n,count", [(3, 1, 8), (4, 1, 16), (3, 2, 64), (5, 1, 32)])
def test_verify_corrections_complete(m, n, count):
    report = verify_corrections(ProtocolConfig(m, n, seed=m + n))
    assert report.branches_checked == count
    assert report.failures == []
    assert report.summary() == f"{count}/{count} branches OK"
    assert json.loads(json.dumps(report.to_dict()))["ok"] is True


def test_verify_detects_broken_minimal():
    report = verify_corrections(ProtocolConfig(3, 2, Mode.MINIMAL))
    assert not report.ok and report.failures


@pytest.mark.parametrize("receiver", [1, 2])
def test_verify_selective_receiver(receiver):
    assert verify_corrections(ProtocolConfig(3, 2, receiver=receiver)).ok


def test_verify_distributed():
    cfg = ProtocolConfig(4, 2, Mode.DISTRIBUTED, allocation={1: [0], 2: [1]})
    assert verify_corrections(cfg).ok


# ---------------------------------------------------------------- withholding


def test_withheld_controller_average():
    cfg = ProtocolConfig(3, 1, withheld_bits={2})
    assert branch_averaged_fidelity(cfg, MSG) == pytest.approx(0.5392, abs=1e-12)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_withheld_controller_matches_closed_form(seed):
    msg = random_message(1, seed)
    got = branch_averaged_fidelity(ProtocolConfig(3, 1, withheld_bits={2}), msg)
    assert got == pytest.approx(withheld_oracle(*msg.amplitudes), abs=1e-10)


@pytest.mark.parametrize(
    "m,n,bits",
    [(3, 1, [2]), (4, 1, [2, 3]), (5, 1, [2, 3, 4]), (3, 2, [4, 5]), (4, 2, [4, 5, 6, 7])],
)
def test_each_controller_is_necessary(m, n, bits):
    msg = random_message(n, 99)
    for b in bits:
        f = branch_averaged_fidelity(ProtocolConfig(m, n, withheld_bits={b}), msg)
        assert f < 1 - 1e-3, b


def test_full_delivery_average_is_one():
    assert branch_averaged_fidelity(ProtocolConfig(4, 1), MSG) == pytest.approx(1, abs=1e-10)


# ---------------------------------------------------------------- engine agreement


@pytest.mark.parametrize("seed", range(15))
def test_engine_branch_in_oracle(seed):
    cfg = ProtocolConfig(3, 2, seed=seed)
    msg = random_message(2, 1000 + seed)
    t, _ = run_protocol(cfg, msg)
    branches = {b.bits: b for b in enumerate_outcomes(cfg, msg, symbolic=False)}
    key = tuple(t.bits[b] for b in sorted(t.bits))
    assert states_match(t.post_measurement_state, branches[key].post_state, 1e-12)


def test_minimal_n1_equals_standard_branchwise():
    for m in (3, 4, 5):
        std = enumerate_outcomes(ProtocolConfig(m, 1), MSG)
        mini = enumerate_outcomes(ProtocolConfig(m, 1, Mode.MINIMAL), MSG)
        assert [b.bits for b in std] == [b.bits for b in mini]
        for a, b in zip(std, mini):
            assert a.symbolic == b.symbolic
            np.testing.assert_allclose(a.post_state.amplitudes, b.post_state.amplitudes, atol=1e-12)


# ---------------------------------------------------------------- tables


def as_map(rows, key=("bell_bits", "controller_bits")):
    return {tuple(r.get(k, "") for k in key): r for r in rows}


@pytest.mark.parametrize(
    "fixture,m,n,stage",
    [
        ("m3n1_pre", 3, 1, "pre"),
        ("m4n1_pre", 4, 1, "pre"),
        ("m3n2_pre", 3, 2, "pre"),
        ("m3n1_post", 3, 1, "post"),
        ("m4n1_post", 4, 1, "post"),
    ],
)
def test_tables_match_reference_rows(reference_tables, fixture, m, n, stage):
    table = regen_table(ProtocolConfig(m, n), stage)
    ours = as_map(table.to_dict()["rows"])
    theirs = as_map(reference_tables[fixture])
    assert set(ours) == set(theirs)
    for key, row in theirs.items():
        want = SignedPermutation.parse(row["state"], n, table.qubits)
        got = SignedPermutation.parse(ours[key]["state"], n, table.qubits)
        assert got == want, key
        if stage == "post":
            assert ours[key]["rotation"] == row["rotation"], key


def test_three_party_rotation_column():
    rows = regen_table(ProtocolConfig(3, 1), "post").rows
    assert [r.label for r in rows] == ["I", "Z", "X", "XZ", "Z", "I", "ZX", "ZXZ"]


def test_three_party_flip_bit_structure():
    for r in regen_table(ProtocolConfig(3, 1), "post").rows:
        c1 = int(r.bell_bits[1])
        assert (r.label in ("I", "Z")) == (c1 == 0)
        assert ("X" in r.label) == (c1 == 1)


def count_swapped_factors(label: str) -> int:
    return sum(part in ("XZ", "ZX") for part in label.split("⊗"))


def test_two_qubit_corrections_against_reference(reference_tables):
    table = regen_table(ProtocolConfig(3, 2), "post")
    ours = as_map(table.to_dict()["rows"])
    theirs = as_map(reference_tables["m3n2_post"])
    assert len(theirs) == 64 and set(ours) == set(theirs)
    for key, row in theirs.items():
        assert ours[key]["rotation"] == row["rotation"], key
        # the reference state column reads two-letter labels in time order,
        # which flips the overall sign once per XZ/ZX factor
        want = SignedPermutation.parse(row["state"], 2, table.qubits)
        got = SignedPermutation.parse(ours[key]["state"], 2, table.qubits)
        assert got.targets == want.targets
        flip = 2 * (count_swapped_factors(row["rotation"]) % 2)
        assert tuple((p + flip) % 4 for p in got.phases) == want.phases, key


@pytest.mark.parametrize("m", [3, 4, 5, 6])
def test_general_pre_controller_pattern(m):
    # corrected form of the general-m table: beta pairs with the complementary ket
    zeros, ones = "0" * (m - 1), "1" * (m - 1)
    expected = {
        "00": f"α|{zeros}⟩+β|{ones}⟩",
        "01": f"α|{ones}⟩+β|{zeros}⟩",
        "10": f"α|{zeros}⟩−β|{ones}⟩",
        "11": f"α|{ones}⟩−β|{zeros}⟩",
    }
    table = regen_table(ProtocolConfig(m, 1), "pre")
    for row in table.rows:
        assert row.state == SignedPermutation.parse(expected[row.bell_bits], 1, table.qubits)


def test_five_party_labels_follow_xor_rule():
    rows = regen_table(ProtocolConfig(5, 1), "post").rows
    assert len(rows) == 32
    for r in rows:
        c = [int(x) for x in r.bell_bits + r.controller_bits]
        z_total = c[0] ^ c[2] ^ c[3] ^ c[4]
        if c[1] == 0:
            want = "Z" if z_total else "I"
        else:
            want = ("Z" if c[0] else "") + "X" + ("Z" if c[2] ^ c[3] ^ c[4] else "")
        assert r.label == want, r.pattern


def test_table_renderings():
    table = regen_table(ProtocolConfig(3, 1), "post")
    md = table.render("md").splitlines()
    assert len(md) == 2 + 8
    assert all(line.startswith("|") and line.endswith("|") for line in md)
    assert md[-1].split("|")[-2].strip() == "ZXZ"
    assert "ZXZ" in table.render("text")
    data = json.loads(table.render("json"))
    assert data["qubits"] == ["q3"] and len(data["rows"]) == 8
    with pytest.raises(ValueError):
        table.render("html")


# ---------------------------------------------------------------- audits


def test_audit_standard_two_qubits():
    report = fidelity_audit(ProtocolConfig(3, 2), trials=30, seed=1)
    assert report.trials == 30 and len(report.fidelities) == 30
    assert report.min >= 1 - 1e-10


def test_audit_minimal_single_qubit_is_perfect():
    assert fidelity_audit(ProtocolConfig(3, 1, Mode.MINIMAL), 40, 2).min >= 1 - 1e-10


def test_audit_minimal_two_qubits_reports():
    report = fidelity_audit(ProtocolConfig(4, 2, Mode.MINIMAL), 20, 3)
    data = report.to_dict()
    assert {"min", "mean", "max", "fidelities"} <= set(data)
    assert 0 <= data["min"] <= data["mean"] <= data["max"] <= 1 + 1e-10


def test_audit_worker_count_does_not_change_results():
    cfg = ProtocolConfig(4, 1)
    a = fidelity_audit(cfg, 12, 5, workers=1)
    b = fidelity_audit(cfg, 12, 5, workers=4)
    assert a.fidelities == b.fidelities


def test_audit_counts_missing_runs():
    report = fidelity_audit(ProtocolConfig(3, 1, withheld_bits={2}), 10, 0)
    assert report.missing_bits == 10


def test_audit_needs_trials():
    with pytest.raises(ValueError):
        fidelity_audit(ProtocolConfig(3, 1), 0, 0)


def test_trial_seeds_are_stable():
    assert trial_seeds(4, 3) == trial_seeds(4, 3)
    assert trial_seeds(4, 3)[:2] == trial_seeds(4, 2)
