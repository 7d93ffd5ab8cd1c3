"""GHZ resources, message states and the global qubit layout.

Global numbering: message qubits are q0..q(n-1). Resource qubits follow, one
contiguous block per participant in participant order. In the standard
layout participant p owns q((p+1)n + j) for GHZ instance j, so instance j is
spread over q(n+j), q(2n+j), ..., q(mn+j).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import LayoutError
from .qstate import StateVector


class Mode(str, enum.Enum):
    STANDARD = "standard"
    DISTRIBUTED = "distributed"
    MINIMAL = "minimal"


@dataclass(frozen=True)
class MessageState:
    n: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if self.n < 1:
            raise ValueError("message width must be >= 1")
        if amps.size != 1 << self.n:
            raise ValueError(f"{self.n}-qubit message needs {1 << self.n} amplitudes")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1) > 1e-12:
            raise ValueError(f"message amplitudes have norm {norm!r}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, amplitudes, normalize: bool = False) -> "MessageState":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if normalize:
            amps = amps / np.linalg.norm(amps)
        n = int(amps.size).bit_length() - 1
        return cls(n, amps)

    @classmethod
    def basis(cls, n: int, index: int) -> "MessageState":
        amps = np.zeros(1 << n, dtype=complex)
        amps[index] = 1
        return cls(n, amps)

    def as_state(self) -> StateVector:
        return StateVector(self.n, self.amplitudes.copy())

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "amplitudes": [[float(a.real), float(a.imag)] for a in self.amplitudes],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "MessageState":
        amps = [complex(re, im) for re, im in data["amplitudes"]]
        return cls(int(data["n"]), amps)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "MessageState":
        return cls.from_dict(json.loads(text))


def random_message(n: int, seed: int) -> MessageState:
    """Haar-random n-qubit state from a normalized complex Gaussian vector."""
    if n < 1:
        raise ValueError("message width must be >= 1")
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal(2 << n)
    amps = raw[0::2] + 1j * raw[1::2]
    return MessageState(n, amps / np.linalg.norm(amps))


@dataclass(frozen=True)
class ResourceLayout:
    m: int
    n: int
    mode: Mode
    receiver: int
    # participant -> ascending message-qubit indices it holds
    message_allocation: Mapping[int, tuple[int, ...]]
    # participant -> ascending global resource qubits it holds
    holdings: Mapping[int, tuple[int, ...]] = field(repr=False)
    total_qubits: int

    @property
    def resource_qubits(self) -> int:
        return self.total_qubits - self.n

    @property
    def receiver_qubits(self) -> tuple[int, ...]:
        return self.holdings[self.receiver]

    def holder_of(self, message_qubit: int) -> int:
        for p, qs in self.message_allocation.items():
            if message_qubit in qs:
                return p
        raise LayoutError(f"message qubit {message_qubit} is not allocated")

    def owner_of(self, qubit: int) -> int:
        """Participant holding global ``qubit`` (message or resource)."""
        if 0 <= qubit < self.n:
            return self.holder_of(qubit)
        for p, qs in self.holdings.items():
            if qubit in qs:
                return p
        raise LayoutError(f"q{qubit} is outside the layout")

    def ghz_groups(self) -> list[tuple[int, ...]]:
        """Global qubits of each GHZ factor of the resource."""
        if self.mode is Mode.MINIMAL:
            return [tuple(range(self.n, self.total_qubits))]
        return [
            tuple(qubit_of(self, p, j) for p in range(self.m)) for j in range(self.n)
        ]


def build_layout(
    m: int,
    n: int,
    mode: Mode | str = Mode.STANDARD,
    receiver: int | None = None,
    allocation: Mapping[int, Sequence[int]] | None = None,
) -> ResourceLayout:
    mode = Mode(mode)
    if m < 3:
        raise LayoutError(f"need at least 3 participants, got m={m}")
    if n < 1:
        raise LayoutError(f"need at least one message qubit, got n={n}")
    receiver = m - 1 if receiver is None else receiver
    if not 1 <= receiver <= m - 1:
        raise LayoutError(f"receiver must be in [1, {m - 1}], got {receiver}")

    if allocation is None:
        allocation = {0: range(n)}
    if mode is Mode.STANDARD and any(p != 0 for p, qs in allocation.items() if len(qs)):
        raise LayoutError("standard mode keeps every message qubit with participant 0")
    alloc: dict[int, tuple[int, ...]] = {}
    seen: list[int] = []
    for p, qs in allocation.items():
        if not 0 <= p < m:
            raise LayoutError(f"participant {p} out of range for m={m}")
        qs = tuple(sorted(qs))
        if not qs:
            continue
        if p == receiver:
            raise LayoutError(f"receiver {p} cannot hold message qubits")
        alloc[p] = qs
        seen.extend(qs)
    if sorted(seen) != list(range(n)):
        raise LayoutError(f"allocation must cover message qubits 0..{n - 1} exactly once")
    alloc = dict(sorted(alloc.items()))

    holdings: dict[int, tuple[int, ...]] = {}
    if mode is Mode.MINIMAL:
        if n > m - 1:
            raise LayoutError(
                f"minimal mode pairs each message qubit with a distinct sender-side "
                f"resource qubit; needs n <= m-1, got n={n}, m={m}"
            )
        nxt = n
        for p in range(m):
            size = n if p == receiver else 1
            holdings[p] = tuple(range(nxt, nxt + size))
            nxt += size
        total = nxt
    else:
        for p in range(m):
            holdings[p] = tuple((p + 1) * n + j for j in range(n))
        total = m * n + n
    return ResourceLayout(m, n, mode, receiver, alloc, holdings, total)


def qubit_of(layout: ResourceLayout, participant: int, instance: int) -> int:
    if not 0 <= participant < layout.m:
        raise LayoutError(f"participant {participant} out of range")
    held = layout.holdings[participant]
    if not 0 <= instance < len(held):
        raise LayoutError(
            f"participant {participant} holds {len(held)} resource qubit(s); "
            f"no instance {instance}"
        )
    return held[instance]


def make_ghz(k: int) -> StateVector:
    if k < 2:
        raise ValueError(f"GHZ state needs k >= 2, got {k}")
    amps = np.zeros(1 << k, dtype=complex)
    amps[0] = amps[-1] = 1 / np.sqrt(2)
    return StateVector(k, amps)


def make_resource(layout: ResourceLayout) -> StateVector:
    """Resource state on the layout's resource qubits; local qubit t is global q(n+t)."""
    groups = layout.ghz_groups()
    masks = [sum(1 << (q - layout.n) for q in g) for g in groups]
    amps = np.zeros(1 << layout.resource_qubits, dtype=complex)
    weight = 2.0 ** (-len(groups) / 2)
    for pattern in range(1 << len(groups)):
        idx = 0
        for g, mask in enumerate(masks):
            if pattern >> g & 1:
                idx |= mask
        amps[idx] = weight
    return StateVector(layout.resource_qubits, amps)


def compose(message: MessageState | StateVector, resource: StateVector) -> StateVector:
    """Tensor product with the message on the low qubits."""
    msg = message.as_state() if isinstance(message, MessageState) else message
    # index = msg_index + (res_index << n)
    amps = np.outer(resource.amplitudes, msg.amplitudes).reshape(-1)
    return StateVector(msg.num_qubits + resource.num_qubits, amps)
