"""Brute-force outcome enumeration, exact table regeneration and audits.

The oracle here does not reuse the engine's measurement loop. It applies all
pre-measurement unitaries of a stage at once and then walks every bit
assignment with deterministic projections, which is equivalent because the
measured qubits are disjoint.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import NonPermutation, SizeCapExceeded, ZeroProbabilityBranch
from .qstate import (
    H,
    DensityMatrix,
    StateVector,
    apply_cnot,
    apply_single,
    fidelity,
    ket_index,
    ket_string,
    project_z,
    reduced_density,
)
from .protocol import (
    ProtocolConfig,
    apply_correction,
    correction_label,
    correction_ops,
    run_protocol,
)
from .resource import MessageState, compose, make_resource, random_message

ORACLE_MAX_QUBITS = 18
PHASE_TOL = 1e-9

GREEK = "αβγδεζηθ"
MINUS = "−"


def _check_cap(config: ProtocolConfig):
    total = config.layout.total_qubits
    if total > ORACLE_MAX_QUBITS:
        raise SizeCapExceeded(
            f"{total} qubits exceeds the enumeration cap of {ORACLE_MAX_QUBITS}"
        )


# --------------------------------------------------------------------------
# exact symbolic form


def amplitude_symbol(index: int, n: int) -> str:
    """Greek letter for message amplitude ``index`` (letters follow ket order q0 q1 ...)."""
    order = int(ket_string(index, n), 2)
    if n <= 3:
        return GREEK[order]
    return f"a{order}"


def _symbol_index(symbol: str, n: int) -> int:
    order = GREEK.index(symbol) if symbol in GREEK else int(symbol[1:])
    return ket_index(format(order, f"0{n}b"))


_PHASE_TEXT = {0: ("", " + "), 1: ("i", " + i"), 2: (MINUS, f" {MINUS} "), 3: (f"{MINUS}i", f" {MINUS} i")}
_TERM = re.compile(r"([+\-−]?)\s*(i?)\s*([α-θ]|a\d+)\s*\|([01]+)⟩")


@dataclass(frozen=True)
class SignedPermutation:
    """Exact action of one measurement branch on the message basis.

    ``targets[j]`` is the basis index (over ``qubits``, qubit ``qubits[k]`` at
    bit k) that message basis state j lands on, with phase ``1j**phases[j]``.
    After every measurement the map is a bijection on 2**n states; for the
    pre-controller stage it is an injection into the larger unmeasured space.
    """

    n: int
    targets: tuple[int, ...]
    phases: tuple[int, ...]
    qubits: tuple[int, ...]

    def __post_init__(self):
        if len(self.targets) != 1 << self.n or len(self.phases) != 1 << self.n:
            raise ValueError("need one target and one phase per message basis state")
        if len(set(self.targets)) != len(self.targets):
            raise NonPermutation("two basis states share a target")

    @property
    def width(self) -> int:
        return len(self.qubits)

    @property
    def is_bijection(self) -> bool:
        return sorted(self.targets) == list(range(1 << self.width))

    def apply(self, amplitudes) -> np.ndarray:
        out = np.zeros(1 << self.width, dtype=complex)
        for j, a in enumerate(np.asarray(amplitudes, dtype=complex)):
            out[self.targets[j]] += (1j ** self.phases[j]) * a
        return out

    def render(self) -> str:
        order = sorted(range(1 << self.n), key=lambda j: int(ket_string(j, self.n), 2))
        parts = []
        for pos, j in enumerate(order):
            lead, mid = _PHASE_TEXT[self.phases[j] % 4]
            parts.append((lead if pos == 0 else mid) + amplitude_symbol(j, self.n))
            parts.append(f"|{ket_string(self.targets[j], self.width)}⟩")
        return "".join(parts)

    @classmethod
    def parse(cls, text: str, n: int, qubits: Sequence[int]) -> "SignedPermutation":
        targets = [None] * (1 << n)
        phases = [None] * (1 << n)
        for sign, imag, sym, ket in _TERM.findall(text):
            j = _symbol_index(sym, n)
            if len(ket) != len(qubits):
                raise ValueError(f"ket |{ket}⟩ does not span {len(qubits)} qubits")
            targets[j] = ket_index(ket)
            phases[j] = (2 if sign in "-−" and sign else 0) + (1 if imag else 0)
        if None in targets:
            raise ValueError(f"could not read every amplitude from {text!r}")
        return cls(n, tuple(targets), tuple(phases), tuple(qubits))

    def up_to_global_phase(self, other: "SignedPermutation") -> bool:
        if self.targets != other.targets:
            return False
        shift = {(a - b) % 4 for a, b in zip(self.phases, other.phases)}
        return len(shift) == 1


# --------------------------------------------------------------------------
# enumeration


@dataclass
class OutcomeBranch:
    bits: tuple[int, ...]
    probability: float
    post_state: StateVector = field(repr=False)
    symbolic: SignedPermutation | None = None

    @property
    def pattern(self) -> str:
        return "".join(map(str, self.bits))


def _bell_unitaries(state: StateVector, config: ProtocolConfig) -> StateVector:
    for s in config.schedule.bell:
        state = apply_cnot(state, s.message_qubit, s.resource_qubit)
        state = apply_single(state, s.message_qubit, H)
    return state


def _controller_unitaries(state: StateVector, config: ProtocolConfig) -> StateVector:
    for c in config.schedule.controllers:
        state = apply_single(state, c.qubit, H)
    return state


def _walk(state: StateVector, targets: Sequence[tuple[int, int]], prob: float = 1.0):
    """Depth-first over every assignment of (qubit, bit_id) targets."""
    if not targets:
        yield {}, prob, state
        return
    (qubit, bit_id), rest = targets[0], targets[1:]
    for value in (0, 1):
        try:
            p, branch = project_z(state, qubit, value)
        except ZeroProbabilityBranch:
            continue
        for bits, q, st in _walk(branch, rest, prob * p):
            yield {bit_id: value, **bits}, q, st


def _stage_targets(config: ProtocolConfig, stage: str):
    sched = config.schedule
    bell = [(sched.qubit_of_bit[b], b) for b in sched.bell_bits]
    ctrl = [(sched.qubit_of_bit[b], b) for b in sched.controller_bits]
    if stage == "pre":
        return bell, []
    if stage == "post":
        return bell, ctrl
    raise ValueError(f"stage must be 'pre' or 'post', got {stage!r}")


def _branches(config: ProtocolConfig, message_state: StateVector, stage: str) -> Iterator:
    bell, ctrl = _stage_targets(config, stage)
    state = _bell_unitaries(compose(message_state, make_resource(config.layout)), config)
    for bits, p, st in _walk(state, bell):
        if stage == "pre":
            yield bits, p, st
            continue
        st = _controller_unitaries(st, config)
        for more, q, final in _walk(st, ctrl, p):
            yield {**bits, **more}, q, final


def _as_tuple(bits: Mapping[int, int], ids: Sequence[int]) -> tuple[int, ...]:
    return tuple(bits[b] for b in ids)


def enumerate_outcomes(
    config: ProtocolConfig,
    message: MessageState,
    stage: str = "post",
    symbolic: bool = True,
) -> list[OutcomeBranch]:
    """Every measurement branch with nonzero probability, ordered by bit pattern.

    ``bits`` lists c0, c1, ... for the measured stage (only the Bell bits for
    ``stage="pre"``).
    """
    _check_cap(config)
    bell, ctrl = _stage_targets(config, stage)
    ids = sorted(b for _, b in bell + ctrl)
    out = []
    for bits, p, st in _branches(config, message.as_state(), stage):
        perm = None
        if symbolic:
            try:
                perm = extract_signed_permutation(config, bits, stage)
            except NonPermutation:
                perm = None
        out.append(OutcomeBranch(_as_tuple(bits, ids), p, st, perm))
    out.sort(key=lambda b: b.bits)
    return out


def unmeasured_qubits(config: ProtocolConfig, stage: str = "post") -> tuple[int, ...]:
    bell, ctrl = _stage_targets(config, stage)
    measured = {q for q, _ in bell + ctrl}
    return tuple(q for q in range(config.layout.total_qubits) if q not in measured)


def _measured_values(config: ProtocolConfig, bits: Mapping[int, int], stage: str) -> dict[int, int]:
    bell, ctrl = _stage_targets(config, stage)
    return {q: int(bits[b]) for q, b in bell + ctrl}


def remaining_vector(
    state: StateVector, measured: Mapping[int, int], keep: Sequence[int]
) -> np.ndarray:
    """Amplitudes over ``keep`` with every measured qubit pinned to its outcome."""
    base = sum(v << q for q, v in measured.items())
    local = np.arange(1 << len(keep))
    idx = np.full(local.shape, base)
    for k, q in enumerate(keep):
        idx |= ((local >> k) & 1) << q
    return state.amplitudes[idx]


def extract_signed_permutation(
    config: ProtocolConfig, bits: Mapping[int, int] | Sequence[int], stage: str = "post"
) -> SignedPermutation:
    """Read a branch's exact map by pushing each message basis state through it."""
    if not isinstance(bits, Mapping):
        bits = dict(enumerate(bits))
    bell, ctrl = _stage_targets(config, stage)
    keep = unmeasured_qubits(config, stage)
    measured = _measured_values(config, bits, stage)
    n = config.n
    resource = make_resource(config.layout)
    targets, phases, weights = [], [], []
    for j in range(1 << n):
        state = _bell_unitaries(compose(StateVector.basis(n, j), resource), config)
        p_total = 1.0
        try:
            for q, b in bell:
                p, state = project_z(state, q, int(bits[b]))
                p_total *= p
            if ctrl:
                state = _controller_unitaries(state, config)
                for q, b in ctrl:
                    p, state = project_z(state, q, int(bits[b]))
                    p_total *= p
        except ZeroProbabilityBranch as exc:
            raise NonPermutation(f"basis state {j} never reaches this branch") from exc
        vec = remaining_vector(state, measured, keep)
        hits = np.flatnonzero(np.abs(vec) > PHASE_TOL)
        if len(hits) != 1:
            raise NonPermutation(
                f"basis state {j} maps to a superposition of {len(hits)} kets"
            )
        t = int(hits[0])
        phase = vec[t] / abs(vec[t])
        k = int(np.argmin([abs(phase - 1j**e) for e in range(4)]))
        if abs(phase - 1j**k) > PHASE_TOL or abs(abs(vec[t]) - 1) > PHASE_TOL:
            raise NonPermutation(f"basis state {j} picks up a non-Pauli phase")
        targets.append(t)
        phases.append(k)
        weights.append(p_total)
    if max(weights) - min(weights) > PHASE_TOL * max(weights):
        raise NonPermutation("branch weights differ across the message basis")
    return SignedPermutation(n, tuple(targets), tuple(phases), keep)


# --------------------------------------------------------------------------
# certification


def overlap(a, b) -> float:
    """|<a|b>|; 1 means equal up to a global phase."""
    return float(abs(np.vdot(np.asarray(a), np.asarray(b))))


def states_match(a, b, tol: float = 1e-12) -> bool:
    """Amplitude-wise equality after removing the relative global phase."""
    a = np.asarray(a.amplitudes if isinstance(a, StateVector) else a)
    b = np.asarray(b.amplitudes if isinstance(b, StateVector) else b)
    inner = np.vdot(a, b)
    if abs(inner) < 1e-300:
        return False
    phase = inner / abs(inner)
    return bool(np.max(np.abs(a * phase - b)) <= tol)


def corrected_output(
    config: ProtocolConfig, branch: OutcomeBranch, *, fold: bool = True, delivered=None
) -> StateVector:
    """Apply the receiver's corrections for ``branch`` (strict unless ``delivered`` is given)."""
    bits = dict(enumerate(branch.bits)) if delivered is None else delivered
    state = branch.post_state
    for spec in config.schedule.corrections:
        ops = correction_ops(config, bits, spec.index, fold=fold, strict=delivered is None)
        state = apply_correction(state, spec.qubit, ops)
    return state


@dataclass
class CorrectionReport:
    config: ProtocolConfig
    branches_checked: int
    failures: list[str]

    @property
    def ok(self) -> bool:
        return not self.failures and self.branches_checked > 0

    def summary(self) -> str:
        good = self.branches_checked - len(self.failures)
        return f"{good}/{self.branches_checked} branches OK"

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "branches_checked": self.branches_checked,
            "failures": self.failures,
            "ok": self.ok,
        }


def verify_corrections(
    config: ProtocolConfig, message: MessageState | None = None, tol: float = 1e-12
) -> CorrectionReport:
    """Correct every branch and compare the receiver's qubits with the message."""
    _check_cap(config)
    if message is None:
        message = random_message(config.n, config.seed)
    keep = config.layout.receiver_qubits
    failures = []
    branches = enumerate_outcomes(config, message, symbolic=False)
    for branch in branches:
        out = corrected_output(config, branch)
        measured = _measured_values(config, dict(enumerate(branch.bits)), "post")
        vec = remaining_vector(out, measured, keep)
        if overlap(message.amplitudes, vec) < 1 - tol:
            failures.append(branch.pattern)
    return CorrectionReport(config, len(branches), failures)


def branch_averaged_fidelity(config: ProtocolConfig, message: MessageState) -> float:
    """Probability-weighted fidelity over all branches, honouring withheld bits."""
    _check_cap(config)
    rho_in = DensityMatrix.from_state(message.amplitudes)
    keep = config.layout.receiver_qubits
    total = 0.0
    for branch in enumerate_outcomes(config, message, symbolic=False):
        delivered = {
            b: v for b, v in enumerate(branch.bits) if b not in config.withheld_bits
        }
        out = corrected_output(config, branch, delivered=delivered)
        total += branch.probability * fidelity(rho_in, reduced_density(out, keep))
    return total


# --------------------------------------------------------------------------
# tables


@dataclass(frozen=True)
class TableRow:
    bell_bits: str
    controller_bits: str
    state: SignedPermutation
    label: str

    @property
    def pattern(self) -> str:
        if self.controller_bits:
            return f"{self.bell_bits}/{self.controller_bits}"
        return self.bell_bits

    @property
    def state_text(self) -> str:
        return self.state.render()


@dataclass
class Table:
    config: ProtocolConfig
    stage: str
    rows: list[TableRow]

    @property
    def qubits(self) -> tuple[int, ...]:
        return unmeasured_qubits(self.config, self.stage)

    def _headers(self) -> list[str]:
        sched = self.config.schedule
        bell = ",".join(f"c{b}" for b in sched.bell_bits)
        kets = "".join(f"q{q}" for q in self.qubits)
        heads = [f"({bell})"]
        if self.stage == "post":
            heads.append("(" + ",".join(f"c{b}" for b in sched.controller_bits) + ")")
        heads.append(f"|{kets}⟩")
        if self.stage == "post":
            heads.append("rotation")
        return heads

    def _cells(self, row: TableRow) -> list[str]:
        cells = [row.bell_bits]
        if self.stage == "post":
            cells.append(row.controller_bits)
        cells.append(row.state_text)
        if self.stage == "post":
            cells.append(row.label)
        return cells

    def render(self, fmt: str = "text") -> str:
        if fmt == "json":
            return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)
        heads = self._headers()
        body = [self._cells(r) for r in self.rows]
        if fmt == "md":
            lines = ["| " + " | ".join(heads) + " |", "|" + "---|" * len(heads)]
            lines += ["| " + " | ".join(c) + " |" for c in body]
            return "\n".join(lines)
        if fmt != "text":
            raise ValueError(f"unknown table format {fmt!r}")
        widths = [max(len(h), *(len(c[i]) for c in body)) for i, h in enumerate(heads)]
        fmt_row = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
        lines = [fmt_row(heads), fmt_row(["-" * w for w in widths])]
        lines += [fmt_row(c) for c in body]
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "stage": self.stage,
            "qubits": [f"q{q}" for q in self.qubits],
            "rows": [
                {
                    "bell_bits": r.bell_bits,
                    "controller_bits": r.controller_bits,
                    "state": r.state_text,
                    "rotation": r.label,
                }
                for r in self.rows
            ],
        }


def _patterns(width: int) -> Iterator[tuple[int, ...]]:
    for v in range(1 << width):
        yield tuple(int(c) for c in format(v, f"0{width}b")) if width else ()


def regen_table(config: ProtocolConfig, stage: str = "post") -> Table:
    """Rows of (bit pattern, exact post-measurement state, receiver rotation)."""
    _check_cap(config)
    sched = config.schedule
    bell_ids, ctrl_ids = sched.bell_bits, sched.controller_bits
    ctrl_space = list(_patterns(len(ctrl_ids))) if stage == "post" else [()]
    rows = []
    for bp in _patterns(len(bell_ids)):
        for cp in ctrl_space:
            bits = dict(zip(bell_ids, bp)) | dict(zip(ctrl_ids, cp))
            perm = extract_signed_permutation(config, bits, stage)
            label = ""
            if stage == "post":
                label = "⊗".join(
                    correction_label(correction_ops(config, bits, j))
                    for j in range(config.n)
                )
            rows.append(
                TableRow("".join(map(str, bp)), "".join(map(str, cp)), perm, label)
            )
    return Table(config, stage, rows)


# --------------------------------------------------------------------------
# audits


@dataclass
class AuditReport:
    config: ProtocolConfig
    trials: int
    seed: int
    fidelities: list[float]
    missing_bits: int = 0

    @property
    def min(self) -> float:
        return min(self.fidelities)

    @property
    def mean(self) -> float:
        return float(np.mean(self.fidelities))

    @property
    def max(self) -> float:
        return max(self.fidelities)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "trials": self.trials,
            "seed": self.seed,
            "min": self.min,
            "mean": self.mean,
            "max": self.max,
            "runs_with_missing_bits": self.missing_bits,
            "fidelities": self.fidelities,
        }


def trial_seeds(seed: int, trials: int) -> list[tuple[int, int]]:
    """(message seed, measurement seed) per trial, independent of worker count."""
    children = np.random.SeedSequence(seed).spawn(trials)
    return [tuple(int(x) for x in c.generate_state(2)) for c in children]


def fidelity_audit(
    config: ProtocolConfig, trials: int, seed: int, workers: int = 1
) -> AuditReport:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    seeds = trial_seeds(seed, trials)

    def one(pair):
        msg_seed, run_seed = pair
        transcript, fid = run_protocol(
            config.replace(seed=run_seed), random_message(config.n, msg_seed)
        )
        return fid, bool(transcript.missing)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(s) for s in seeds]
    return AuditReport(
        config,
        trials,
        seed,
        [f for f, _ in results],
        sum(1 for _, miss in results if miss),
    )
