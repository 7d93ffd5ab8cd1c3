"""Round-based engine for controlled teleportation over GHZ resources.

Classical bit numbering (standard layout, receiver qubit j = q(mn+j)):

* ``c_j``       phase bit of the Bell measurement on message qubit j
* ``c_(n+j)``   flip bit of that Bell measurement
* ``c_(in+j)``  for i = 2..m-1, the controllers' bits on GHZ instance j,
                assigned to the non-measuring participants in ascending order

so the receiver's j-th qubit gets ``Z^c_j . X^c_(n+j) . Z^(c_2n+j xor ...)``.

Rounds: 1 Bell measurements (ascending j), 2 controller measurements
(ascending participant, then instance), 3 classical routing, 4 corrections
(ascending j). A final round 5 records the result.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import ClassVar, Iterable, Mapping, Sequence

import numpy as np

from .errors import LayoutError, MissingClassicalBit
from .qstate import (
    H,
    X,
    Z,
    DensityMatrix,
    Gate,
    StateVector,
    apply_cnot,
    apply_single,
    fidelity,
    measure_z,
    reduced_density,
)
from .resource import (
    MessageState,
    Mode,
    ResourceLayout,
    build_layout,
    compose,
    make_resource,
    qubit_of,
)

MAX_QUBITS = 22


def bit_name(bit: int) -> str:
    return f"c{bit}"


def parse_bit(name: str | int) -> int:
    if isinstance(name, int):
        return name
    text = name.strip()
    if text[:1] in ("c", "C"):
        text = text[1:]
    return int(text)


# --------------------------------------------------------------------------
# schedule


@dataclass(frozen=True)
class BellStep:
    holder: int
    message_qubit: int
    resource_qubit: int
    phase_bit: int
    flip_bit: int


@dataclass(frozen=True)
class ControllerStep:
    participant: int
    qubit: int
    bit: int


@dataclass(frozen=True)
class CorrectionSpec:
    index: int  # j
    qubit: int
    phase_bit: int
    flip_bit: int
    controller_bits: tuple[int, ...]


@dataclass(frozen=True)
class Schedule:
    bell: tuple[BellStep, ...]
    controllers: tuple[ControllerStep, ...]
    corrections: tuple[CorrectionSpec, ...]
    num_bits: int

    @cached_property
    def qubit_of_bit(self) -> dict[int, int]:
        out = {}
        for s in self.bell:
            out[s.phase_bit] = s.message_qubit
            out[s.flip_bit] = s.resource_qubit
        for c in self.controllers:
            out[c.bit] = c.qubit
        return out

    @cached_property
    def sender_of_bit(self) -> dict[int, int]:
        out = {}
        for s in self.bell:
            out[s.phase_bit] = out[s.flip_bit] = s.holder
        for c in self.controllers:
            out[c.bit] = c.participant
        return out

    @property
    def bell_bits(self) -> tuple[int, ...]:
        return tuple(sorted(b for s in self.bell for b in (s.phase_bit, s.flip_bit)))

    @property
    def controller_bits(self) -> tuple[int, ...]:
        return tuple(sorted(c.bit for c in self.controllers))


def build_schedule(layout: ResourceLayout) -> Schedule:
    m, n, rx = layout.m, layout.n, layout.receiver
    if layout.mode is Mode.MINIMAL:
        return _minimal_schedule(layout)

    bell = []
    by_participant: dict[int, list[ControllerStep]] = {}
    for j in range(n):
        holder = layout.holder_of(j)
        bell.append(BellStep(holder, j, qubit_of(layout, holder, j), j, n + j))
        others = [p for p in range(m) if p not in (rx, holder)]
        for i, p in enumerate(others, start=2):
            step = ControllerStep(p, qubit_of(layout, p, j), i * n + j)
            by_participant.setdefault(p, []).append(step)
    controllers = [s for p in sorted(by_participant) for s in by_participant[p]]
    corrections = tuple(
        CorrectionSpec(
            j,
            qubit_of(layout, rx, j),
            j,
            n + j,
            tuple(i * n + j for i in range(2, m)),
        )
        for j in range(n)
    )
    return Schedule(tuple(bell), tuple(controllers), corrections, m * n)


def _minimal_schedule(layout: ResourceLayout) -> Schedule:
    # One shared GHZ: each non-receiver holds a single resource qubit.
    m, n, rx = layout.m, layout.n, layout.receiver
    free = {p: layout.holdings[p][0] for p in range(m) if p != rx}
    pairs: dict[int, int] = {}
    leftovers = []
    for p, qs in layout.message_allocation.items():
        pairs[qs[0]] = free.pop(p)
        leftovers.extend((p, q) for q in qs[1:])
    for p, q in sorted(leftovers, key=lambda t: t[1]):
        owner = min(free)
        pairs[q] = free.pop(owner)
    bell = tuple(
        BellStep(layout.holder_of(j), j, pairs[j], j, n + j) for j in range(n)
    )
    controllers = tuple(
        ControllerStep(p, q, 2 * n + k) for k, (p, q) in enumerate(sorted(free.items()))
    )
    ctrl_bits = tuple(c.bit for c in controllers)
    corrections = tuple(
        CorrectionSpec(j, layout.holdings[rx][j], j, n + j, ctrl_bits if j == 0 else ())
        for j in range(n)
    )
    return Schedule(bell, controllers, corrections, 2 * n + len(controllers))


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ProtocolConfig:
    m: int
    n: int
    mode: Mode = Mode.STANDARD
    receiver: int | None = None
    allocation: Mapping[int, Sequence[int]] | None = None
    seed: int = 0
    withheld_bits: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.receiver is None:
            object.__setattr__(self, "receiver", self.m - 1)
        if self.allocation is None:
            object.__setattr__(self, "allocation", {0: tuple(range(self.n))})
        else:
            alloc = {int(p): tuple(int(q) for q in qs) for p, qs in self.allocation.items()}
            object.__setattr__(self, "allocation", dict(sorted(alloc.items())))
        object.__setattr__(
            self, "withheld_bits", frozenset(parse_bit(b) for b in self.withheld_bits)
        )
        if self.m < 3 or self.n < 1:
            raise LayoutError(f"need m >= 3 and n >= 1, got m={self.m}, n={self.n}")
        if self.m * self.n + self.n > MAX_QUBITS:
            raise LayoutError(
                f"m*n + n = {self.m * self.n + self.n} exceeds the {MAX_QUBITS}-qubit cap"
            )
        layout = self.layout  # validates
        bad = [b for b in self.withheld_bits if not 0 <= b < self.schedule.num_bits]
        if bad:
            raise LayoutError(f"withheld bits {sorted(bad)} outside c0..c{self.schedule.num_bits - 1}")
        del layout

    @cached_property
    def layout(self) -> ResourceLayout:
        return build_layout(self.m, self.n, self.mode, self.receiver, self.allocation)

    @cached_property
    def schedule(self) -> Schedule:
        return build_schedule(self.layout)

    def replace(self, **changes) -> "ProtocolConfig":
        fields = dict(
            m=self.m,
            n=self.n,
            mode=self.mode,
            receiver=self.receiver,
            allocation=self.allocation,
            seed=self.seed,
            withheld_bits=self.withheld_bits,
        )
        fields.update(changes)
        return ProtocolConfig(**fields)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "mode": self.mode.value,
            "receiver": self.receiver,
            "allocation": {str(p): list(qs) for p, qs in self.allocation.items()},
            "seed": self.seed,
            "withheld": [bit_name(b) for b in sorted(self.withheld_bits)],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ProtocolConfig":
        return cls(
            m=int(data["m"]),
            n=int(data["n"]),
            mode=Mode(data.get("mode", "standard")),
            receiver=data.get("receiver"),
            allocation={int(p): qs for p, qs in data["allocation"].items()}
            if data.get("allocation")
            else None,
            seed=int(data.get("seed", 0)),
            withheld_bits=frozenset(parse_bit(b) for b in data.get("withheld", ())),
        )


# --------------------------------------------------------------------------
# corrections


def correction_ops(
    config: ProtocolConfig,
    bits: Mapping[int, int],
    j: int,
    *,
    fold: bool = True,
    strict: bool = True,
) -> tuple[Gate, ...]:
    """Pauli correction for the receiver's j-th qubit, in operator-product order.

    The returned tuple reads like the written product, so the last gate is
    applied first (see :func:`apply_correction`). With ``fold`` the
    controller Z's collapse to a single ``Z^(xor of bits)``, and when no X is
    needed that Z merges with the phase Z, giving at most three gates.
    With ``strict=False`` factors whose bit is missing are dropped instead of
    raising :class:`MissingClassicalBit`.
    """
    spec = config.schedule.corrections[j]

    def get(b):
        if b in bits:
            return int(bits[b])
        if strict:
            raise MissingClassicalBit(b)
        return None

    phase = get(spec.phase_bit)
    flip = get(spec.flip_bit)
    ctrl = [get(b) for b in spec.controller_bits]
    ctrl = [c for c in ctrl if c is not None]
    phase = phase or 0
    flip = flip or 0

    if not fold:
        ops = [Z] * phase + [X] * flip + [Z] * sum(ctrl)
        return tuple(ops)
    parity = sum(ctrl) % 2
    if not flip:
        return (Z,) if phase ^ parity else ()
    return tuple([Z] * phase + [X] + [Z] * parity)


def correction_label(ops: Iterable[Gate]) -> str:
    names = "".join(g.name for g in ops)
    return names or "I"


def apply_correction(state: StateVector, qubit: int, ops: Sequence[Gate]) -> StateVector:
    for gate in reversed(ops):
        state = apply_single(state, qubit, gate)
    return state


def missing_bits(config: ProtocolConfig, bits: Mapping[int, int], j: int) -> list[int]:
    spec = config.schedule.corrections[j]
    need = (spec.phase_bit, spec.flip_bit, *spec.controller_bits)
    return [b for b in need if b not in bits]


# --------------------------------------------------------------------------
# transcript


@dataclass(frozen=True)
class ClassicalMessage:
    bit_id: int
    value: int
    sender: int
    recipients: tuple[int, ...]
    sequence_no: int

    def __post_init__(self):
        if self.value not in (0, 1):
            raise ValueError("classical bits are 0 or 1")


@dataclass
class Event:
    type: ClassVar[str] = "event"
    round: int

    def to_dict(self) -> dict:
        return {"type": self.type, "round": self.round}


@dataclass
class BellOutcome(Event):
    type: ClassVar[str] = "bell_outcome"
    participant: int
    pair: tuple[int, int]
    c_phase: int
    c_flip: int
    values: tuple[int, int]

    def to_dict(self):
        return {
            **super().to_dict(),
            "participant": self.participant,
            "pair": [f"q{q}" for q in self.pair],
            "c_phase": bit_name(self.c_phase),
            "c_flip": bit_name(self.c_flip),
            "values": list(self.values),
        }


@dataclass
class ControllerOutcome(Event):
    type: ClassVar[str] = "controller_outcome"
    participant: int
    qubit: int
    bit_id: int
    value: int

    def to_dict(self):
        return {
            **super().to_dict(),
            "participant": self.participant,
            "qubit": f"q{self.qubit}",
            "bit": bit_name(self.bit_id),
            "value": self.value,
        }


@dataclass
class MessageEvent(Event):
    type: ClassVar[str] = "message"
    message: ClassicalMessage

    def to_dict(self):
        msg = self.message
        return {
            **super().to_dict(),
            "bit": bit_name(msg.bit_id),
            "value": msg.value,
            "sender": msg.sender,
            "recipients": list(msg.recipients),
            "sequence_no": msg.sequence_no,
        }


@dataclass
class MissingBitEvent(Event):
    type: ClassVar[str] = "missing_classical_bit"
    bit_id: int
    qubit: int

    def to_dict(self):
        return {**super().to_dict(), "bit": bit_name(self.bit_id), "qubit": f"q{self.qubit}"}


@dataclass
class CorrectionEvent(Event):
    type: ClassVar[str] = "correction"
    qubit: int
    gates: tuple[str, ...]
    uses: tuple[int, ...]

    def to_dict(self):
        return {
            **super().to_dict(),
            "qubit": f"q{self.qubit}",
            "gates": list(self.gates),
            "label": "".join(self.gates) or "I",
            "uses": [bit_name(b) for b in self.uses],
        }


@dataclass
class ResultEvent(Event):
    type: ClassVar[str] = "result"
    fidelity: float
    output: DensityMatrix

    def to_dict(self):
        return {
            **super().to_dict(),
            "fidelity": self.fidelity,
            "qubits": self.output.num_qubits,
            "rho_out": _matrix_to_json(self.output.matrix),
        }


def _matrix_to_json(mat: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in mat]


def matrix_from_json(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows])


@dataclass
class Transcript:
    config: ProtocolConfig
    message: MessageState
    events: list[Event] = field(default_factory=list)
    fidelity: float | None = None
    bits: dict[int, int] = field(default_factory=dict)
    # not serialized: kept for oracle cross-checks
    post_measurement_state: StateVector | None = field(default=None, repr=False)
    final_state: StateVector | None = field(default=None, repr=False)

    def of_type(self, cls) -> list:
        return [e for e in self.events if isinstance(e, cls)]

    @property
    def missing(self) -> list[int]:
        return sorted({e.bit_id for e in self.of_type(MissingBitEvent)})

    @property
    def output(self) -> DensityMatrix:
        return self.of_type(ResultEvent)[-1].output

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "message": self.message.to_dict(),
            "events": [e.to_dict() for e in self.events],
            "fidelity": self.fidelity,
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


# --------------------------------------------------------------------------
# participants and engine


class Participant:
    """One party; advances ready -> measured -> sent -> done."""

    def __init__(self, pid: int, config: ProtocolConfig):
        sched = config.schedule
        self.pid = pid
        self.bell_steps = [s for s in sched.bell if s.holder == pid]
        self.controller_steps = [s for s in sched.controllers if s.participant == pid]
        self.is_receiver = pid == config.receiver
        self.results: dict[int, int] = {}
        self.inbox: list[ClassicalMessage] = []
        self.phase = "ready"

    def received_bits(self) -> dict[int, int]:
        return {msg.bit_id: msg.value for msg in self.inbox}


def bell_measure(
    state: StateVector, message_qubit: int, resource_qubit: int, rng
) -> tuple[int, int, StateVector]:
    """CNOT(message -> resource), H(message), then Z-measure both."""
    state = apply_cnot(state, message_qubit, resource_qubit)
    state = apply_single(state, message_qubit, H)
    c_phase, state = measure_z(state, message_qubit, rng)
    c_flip, state = measure_z(state, resource_qubit, rng)
    return c_phase, c_flip, state


def controller_measure(state: StateVector, qubit: int, rng) -> tuple[int, StateVector]:
    state = apply_single(state, qubit, H)
    return measure_z(state, qubit, rng)


def route_bits(config: ProtocolConfig, transcript: Transcript) -> list[ClassicalMessage]:
    """Delivery plan: every delivered bit goes to the receiver only, sender-FIFO."""
    plan = []
    produced: list[tuple[int, int, int]] = []  # (sender, bit, value) in event order
    for ev in transcript.events:
        if isinstance(ev, BellOutcome):
            produced.append((ev.participant, ev.c_phase, ev.values[0]))
            produced.append((ev.participant, ev.c_flip, ev.values[1]))
        elif isinstance(ev, ControllerOutcome):
            produced.append((ev.participant, ev.bit_id, ev.value))
    for sender, bit, value in produced:
        if bit in config.withheld_bits:
            continue
        plan.append(ClassicalMessage(bit, value, sender, (config.receiver,), len(plan)))
    return plan


def run_protocol(
    config: ProtocolConfig, message: MessageState
) -> tuple[Transcript, float]:
    if message.n != config.n:
        raise LayoutError(f"message has {message.n} qubits, config expects {config.n}")
    layout = config.layout
    rng = np.random.default_rng(config.seed)
    parties = {p: Participant(p, config) for p in range(config.m)}
    transcript = Transcript(config, message)
    state = compose(message, make_resource(layout))

    # round 1: Bell measurements, ascending message qubit
    for step in config.schedule.bell:
        who = parties[step.holder]
        c_phase, c_flip, state = bell_measure(state, step.message_qubit, step.resource_qubit, rng)
        who.results[step.phase_bit] = c_phase
        who.results[step.flip_bit] = c_flip
        transcript.events.append(
            BellOutcome(
                1,
                step.holder,
                (step.message_qubit, step.resource_qubit),
                step.phase_bit,
                step.flip_bit,
                (c_phase, c_flip),
            )
        )
    # round 2: controllers, ascending participant then instance
    for step in config.schedule.controllers:
        bit, state = controller_measure(state, step.qubit, rng)
        parties[step.participant].results[step.bit] = bit
        transcript.events.append(
            ControllerOutcome(2, step.participant, step.qubit, step.bit, bit)
        )
    for p in parties.values():
        if not p.is_receiver:
            p.phase = "measured"
        transcript.bits.update(p.results)
    transcript.post_measurement_state = state

    # round 3: classical routing
    for msg in route_bits(config, transcript):
        parties[msg.sender].phase = "sent"
        for r in msg.recipients:
            parties[r].inbox.append(msg)
        transcript.events.append(MessageEvent(3, msg))

    # round 4: receiver corrections
    receiver = parties[config.receiver]
    known = receiver.received_bits()
    for spec in config.schedule.corrections:
        lacking = missing_bits(config, known, spec.index)
        for b in lacking:
            transcript.events.append(MissingBitEvent(4, b, spec.qubit))
        ops = correction_ops(config, known, spec.index, strict=not lacking)
        state = apply_correction(state, spec.qubit, ops)
        uses = tuple(
            b
            for b in (spec.phase_bit, spec.flip_bit, *spec.controller_bits)
            if b in known
        )
        transcript.events.append(
            CorrectionEvent(4, spec.qubit, tuple(g.name for g in ops), uses)
        )
    for p in parties.values():
        p.phase = "done"
    transcript.final_state = state

    rho_out = reduced_density(state, layout.receiver_qubits)
    rho_in = DensityMatrix.from_state(message.amplitudes)
    fid = fidelity(rho_in, rho_out)
    transcript.fidelity = fid
    transcript.events.append(ResultEvent(5, fid, rho_out))
    return transcript, fid
