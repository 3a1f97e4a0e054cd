"""Hyperbolic delay-discounting scores from intertemporal-choice questionnaires.

Delays are in days. A questionnaire block offers a ladder of immediate
amounts against one delayed amount; the switch point between "take the
money now" and "wait" gives an indifference value V, from which the
hyperbolic rate k = (A - V) / (V * D) follows. A user's DDR is the mean
of log10 k over blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, FormatError, InputError

K_FLOOR = 1e-5

# Fractions of the delayed amount offered as immediate rewards. Opens with
# the familiar 1000, 950, 900 sequence and then descends roughly
# geometrically so that steep discounters are still bracketed at 5 years.
GEOMETRIC_FRACTIONS = (
    1.0, 0.95, 0.90, 0.80, 0.65, 0.50, 0.35, 0.25,
    0.15, 0.10, 0.05, 0.025, 0.01, 0.005, 0.001,
)

# (delayed amount, delay in days)
DEFAULT_BLOCKS = (
    (1000.0, 7),
    (1000.0, 30),
    (1000.0, 180),
    (1000.0, 365),
    (1000.0, 1825),
    (100.0, 30),
)


@dataclass(frozen=True)
class DelayBlock:
    delayed_amount: float
    delay_days: int
    immediate_ladder: tuple

    def __post_init__(self):
        if not self.delayed_amount > 0:
            raise DomainError("delayed_amount must be positive")
        if int(self.delay_days) != self.delay_days or self.delay_days < 1:
            raise DomainError("delay_days must be an integer >= 1")
        ladder = tuple(float(v) for v in self.immediate_ladder)
        if not ladder:
            raise InputError("empty immediate ladder")
        for hi, lo in zip(ladder, ladder[1:]):
            if not hi > lo:
                raise InputError("immediate ladder must be strictly decreasing")
        if ladder[-1] <= 0 or ladder[0] > self.delayed_amount:
            raise InputError("ladder values must lie in (0, delayed_amount]")
        object.__setattr__(self, "immediate_ladder", ladder)


@dataclass(frozen=True)
class DiscountProtocol:
    blocks: tuple

    def __post_init__(self):
        if len(self.blocks) == 0:
            raise InputError("a protocol needs at least one block")
        object.__setattr__(self, "blocks", tuple(self.blocks))


@dataclass
class Questionnaire:
    user_id: str
    responses: list  # per block, list of bool chose_immediate


@dataclass
class BlockScore:
    block_index: int
    indifference_value: float
    k: float


@dataclass
class DdrScore:
    per_block_k: list = field(default_factory=list)
    ddr: float = float("nan")


def linear_ladder(delayed_amount, steps=15, step_fraction=0.05):
    """Ladder A, A(1-s), A(1-2s), ... with `steps` rungs."""
    step = delayed_amount * step_fraction
    return tuple(delayed_amount - i * step for i in range(steps))


def geometric_ladder(delayed_amount):
    return tuple(delayed_amount * f for f in GEOMETRIC_FRACTIONS)


def default_protocol(ladder="geometric"):
    """Six-block protocol: $1000 at 1 week .. 5 years plus $100 at 1 month.

    ``ladder="linear"`` gives the 15-rung A, 0.95A, ..., 0.3A ladder instead.
    """
    make = {"geometric": geometric_ladder, "linear": linear_ladder}.get(ladder)
    if make is None:
        raise InputError(f"unknown ladder kind {ladder!r}")
    return DiscountProtocol(
        tuple(DelayBlock(a, d, make(a)) for a, d in DEFAULT_BLOCKS))


def subjective_value(delayed_amount, k, delay_days):
    """Hyperbolic present value A / (1 + k D)."""
    if delayed_amount <= 0 or k < 0 or delay_days < 0:
        raise DomainError("subjective_value needs A > 0, k >= 0, D >= 0")
    return delayed_amount / (1.0 + k * delay_days)


def _check_responses(block, responses):
    if len(responses) != len(block.immediate_ladder):
        raise InputError(
            f"{len(responses)} responses for a ladder of "
            f"{len(block.immediate_ladder)} amounts")


def indifference_value(block: DelayBlock, responses: Sequence[bool]) -> float:
    """Midpoint between the lowest accepted and highest rejected immediate amount.

    All-delayed gives V = A. All-immediate gives the ladder minimum minus
    half of the last step (or half the minimum if that would not be positive).
    """
    _check_responses(block, responses)
    ladder = block.immediate_ladder
    accepted = [a for a, imm in zip(ladder, responses) if imm]
    rejected = [a for a, imm in zip(ladder, responses) if not imm]
    if not accepted:
        return float(block.delayed_amount)
    if not rejected:
        low = ladder[-1]
        half_step = (ladder[-2] - ladder[-1]) / 2.0 if len(ladder) > 1 else low / 2.0
        v = low - half_step
        return v if v > 0 else low / 2.0
    return (min(accepted) + max(rejected)) / 2.0


def k_from_indifference(delayed_amount, indifference, delay_days, k_floor=K_FLOOR):
    if indifference <= 0 or indifference > delayed_amount:
        raise DomainError("indifference value must lie in (0, delayed_amount]")
    if delay_days < 1:
        raise DomainError("delay_days must be >= 1")
    k = (delayed_amount - indifference) / (indifference * delay_days)
    return max(k, k_floor)


def _check_questionnaire(protocol, q):
    if len(q.responses) != len(protocol.blocks):
        raise InputError(
            f"user {q.user_id}: {len(q.responses)} response blocks, "
            f"protocol has {len(protocol.blocks)}")


def score_questionnaire(protocol: DiscountProtocol, q: Questionnaire,
                        k_floor=K_FLOOR, log_base=10.0) -> DdrScore:
    _check_questionnaire(protocol, q)
    per_block = []
    logs = []
    for i, (block, resp) in enumerate(zip(protocol.blocks, q.responses)):
        v = indifference_value(block, resp)
        k = k_from_indifference(block.delayed_amount, v, block.delay_days, k_floor)
        per_block.append(BlockScore(i, v, k))
        logs.append(math.log(k, log_base))
    # fsum keeps the mean independent of block order
    return DdrScore(per_block, math.fsum(logs) / len(logs))


def simulate_responses(protocol: DiscountProtocol, true_k, user_id="sim") -> Questionnaire:
    """Choices of an ideal hyperbolic discounter; ties go to the delayed reward."""
    if true_k < 0:
        raise DomainError("true_k must be >= 0")
    responses = []
    for block in protocol.blocks:
        v = subjective_value(block.delayed_amount, true_k, block.delay_days)
        responses.append([amount > v for amount in block.immediate_ladder])
    return Questionnaire(user_id, responses)


def resolution_bound(protocol: DiscountProtocol, q: Questionnaire,
                     k_floor=K_FLOOR, log_base=10.0) -> float:
    """Worst-case |recovered ddr - true mean log k| implied by the ladder brackets.

    For each block the true indifference value lies somewhere between the
    highest rejected and the lowest accepted amount; the bound is the
    largest log-gap between the midpoint estimate and either bracket edge,
    with rates clamped at `k_floor`. A block answered "immediate" at every
    rung has no lower edge, so the bound is infinite.
    """
    _check_questionnaire(protocol, q)
    gaps = []
    for block, resp in zip(protocol.blocks, q.responses):
        _check_responses(block, resp)
        a, d = block.delayed_amount, block.delay_days
        accepted = [x for x, imm in zip(block.immediate_ladder, resp) if imm]
        rejected = [x for x, imm in zip(block.immediate_ladder, resp) if not imm]
        if not accepted:
            # V* >= top rung; only possible when the top rung equals A
            gaps.append(0.0)
            continue
        if not rejected:
            return math.inf
        hi_v, lo_v = min(accepted), max(rejected)
        est = math.log(k_from_indifference(a, (hi_v + lo_v) / 2.0, d, k_floor), log_base)
        k_hi_v = max((a - hi_v) / (hi_v * d), k_floor)
        k_lo_v = k_from_indifference(a, lo_v, d, k_floor)
        gaps.append(max(abs(est - math.log(k_hi_v, log_base)),
                        abs(est - math.log(k_lo_v, log_base))))
    return math.fsum(gaps) / len(gaps)


# -- file formats -----------------------------------------------------------

def read_questionnaires(path, protocol: DiscountProtocol) -> list:
    """Parse ``user_id, block_index, ladder_position, chose_immediate`` TSV lines."""
    cells = {}
    order = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 tab-separated fields")
            uid, b, pos, choice = parts
            try:
                b, pos = int(b), int(pos)
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-integer block or position") from None
            if choice not in ("0", "1"):
                raise FormatError(f"{path}:{lineno}: chose_immediate must be 0 or 1")
            if not 0 <= b < len(protocol.blocks):
                raise FormatError(f"{path}:{lineno}: block index {b} out of range")
            if not 0 <= pos < len(protocol.blocks[b].immediate_ladder):
                raise FormatError(f"{path}:{lineno}: ladder position {pos} out of range")
            if uid not in cells:
                cells[uid] = {}
                order.append(uid)
            if (b, pos) in cells[uid]:
                raise FormatError(f"{path}:{lineno}: duplicate cell for user {uid}")
            cells[uid][(b, pos)] = choice == "1"
    if not order:
        raise FormatError(f"{path}: no questionnaire lines")
    out = []
    for uid in order:
        responses = []
        for b, block in enumerate(protocol.blocks):
            row = []
            for pos in range(len(block.immediate_ladder)):
                if (b, pos) not in cells[uid]:
                    raise FormatError(f"{path}: user {uid} lacks block {b} position {pos}")
                row.append(cells[uid][(b, pos)])
            responses.append(row)
        out.append(Questionnaire(uid, responses))
    return out


def write_questionnaires(path, questionnaires: Iterable[Questionnaire]):
    with open(path, "w", encoding="utf-8") as fh:
        for q in questionnaires:
            for b, resp in enumerate(q.responses):
                for pos, imm in enumerate(resp):
                    fh.write(f"{q.user_id}\t{b}\t{pos}\t{int(bool(imm))}\n")


def write_ddr_table(path, table):
    """Write ``user_id<TAB>ddr`` lines at full float precision."""
    with open(path, "w", encoding="utf-8") as fh:
        for uid, ddr in table.items():
            fh.write(f"{uid}\t{float(ddr)!r}\n")


def read_ddr_table(path) -> dict:
    table = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(f"{path}:{lineno}: expected user_id<TAB>ddr")
            try:
                value = float(parts[1])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: ddr is not a number") from None
            if not np.isfinite(value):
                raise FormatError(f"{path}:{lineno}: ddr is not finite")
            table[parts[0]] = value
    if not table:
        raise FormatError(f"{path}: no labels")
    return table
