"""Per-sequence coding-configuration competition under a dataset bit budget.

Every sequence is encoded with every candidate configuration; each
candidate gets a Lagrangian cost ``J = D + lambda * R`` with ``D = 1 - MS-SSIM``
and ``R`` in bits per second.  One lambda is shared by the whole dataset and
searched by bisection so the selected streams fit the budget.  The bits
left over after bisection are then spent greedily on the upgrades with the
best distortion drop per extra bit.  If that still leaves the selection under
90% of the budget, upgrades costing the least distortion per extra bit are
taken until the floor is met or nothing fits.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

from .codec import decode_bytes, encode_sequence
from .errors import BudgetError, ConfigError, RangeError
from .media import Sequence
from .metrics import ms_ssim, ms_ssim_db, psnr

log = logging.getLogger(__name__)

INTRA_PERIODS = (32, 64, 128, 320)
GOP_SIZES = (1, 2, 4, 8, 16)
QUALITIES = tuple(range(1, 9))
BISECTION_STEPS = 64
UTILIZATION_FLOOR = 0.9


@dataclass(frozen=True, order=True)
class CodingChoice:
    intra_period: int
    gop_size: int
    quality: int
    downsample: bool = False

    def __post_init__(self):
        if self.intra_period < 1:
            raise ConfigError(f"intra period must be positive, got {self.intra_period}")
        g = self.gop_size
        if g < 1 or g & (g - 1):
            raise ConfigError(f"GOP size must be a power of two, got {g}")
        if g > self.intra_period:
            raise ConfigError(f"GOP size {g} exceeds intra period {self.intra_period}")
        if not 1 <= self.quality <= 8:
            raise ConfigError(f"quality index must be in 1..8, got {self.quality}")

    def label(self):
        ds = "/ds" if self.downsample else ""
        return f"ip{self.intra_period}/gop{self.gop_size}/q{self.quality}{ds}"


def candidate_grid(intra_periods=INTRA_PERIODS, gop_sizes=GOP_SIZES, qualities=QUALITIES,
                   downsample=(False, True)) -> List[CodingChoice]:
    """Cartesian product of the options, dropping GOPs longer than the intra period."""
    out = []
    for ip, g, q, ds in itertools.product(intra_periods, gop_sizes, qualities, downsample):
        if g <= ip:
            out.append(CodingChoice(ip, g, q, bool(ds)))
    return sorted(out)


@dataclass(frozen=True)
class RdCost:
    rate: float
    distortion: float
    lam: float

    @property
    def j(self):
        return self.distortion + self.lam * self.rate


def rd_cost(rate: float, distortion: float, lam: float) -> RdCost:
    if rate < 0 or distortion < 0 or lam < 0:
        raise RangeError(f"negative input to RD cost (R={rate}, D={distortion}, lambda={lam})")
    return RdCost(float(rate), float(distortion), float(lam))


@dataclass
class Candidate:
    """One evaluated (sequence, choice) pair."""

    sequence: str
    choice: CodingChoice
    bits: int
    duration: float
    ms_ssim: float
    psnr: float = 0.0
    data: Optional[bytes] = field(default=None, repr=False, compare=False)

    @property
    def rate(self):
        return self.bits / self.duration

    @property
    def distortion(self):
        return max(0.0, 1.0 - self.ms_ssim)

    @property
    def ms_ssim_db(self):
        return ms_ssim_db(min(max(self.ms_ssim, 0.0), 1.0))


def evaluate_choice(seq: Sequence, choice: CodingChoice, keep_stream=True) -> Candidate:
    """Encode, decode and score ``seq`` under ``choice``."""
    es = encode_sequence(seq, choice.intra_period, choice.gop_size, choice.quality,
                         choice.downsample)
    decoded = decode_bytes(es.data, seq.name)
    return Candidate(
        seq.name, choice, es.bits, float(seq.duration),
        ms_ssim(seq, decoded), psnr(seq, decoded),
        es.data if keep_stream else None,
    )


def _evaluate_task(args):
    seq, choice, keep = args
    return evaluate_choice(seq, choice, keep)


def resolve_jobs(jobs: Optional[int] = None) -> int:
    env = os.environ.get("RDVK_THREADS")
    if env:
        try:
            jobs = int(env)
        except ValueError:
            raise ConfigError(f"RDVK_THREADS must be an integer, got {env!r}") from None
    if jobs is None:
        jobs = 1
    if jobs < 1:
        raise ConfigError(f"job count must be positive, got {jobs}")
    return jobs


def evaluate_grid(sequences: Iterable[Sequence], choices: Iterable[CodingChoice], jobs=None,
                  keep_streams=True) -> Dict[str, List[Candidate]]:
    """Evaluate every choice on every sequence. Result order does not depend on ``jobs``."""
    seqs = list(sequences)
    choices = sorted(set(choices))
    names = [s.name for s in seqs]
    if len(set(names)) != len(names):
        raise ConfigError("sequence names must be unique")
    tasks = [(s, c, keep_streams) for s in seqs for c in choices]
    jobs = resolve_jobs(jobs)
    if jobs == 1 or len(tasks) < 2:
        results = [_evaluate_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_evaluate_task, tasks, chunksize=1))
    table: Dict[str, List[Candidate]] = {n: [] for n in names}
    for r in results:
        table[r.sequence].append(r)
    return table


def select_best(candidates, lam: Optional[float] = None):
    """Lowest-J candidate; ties go to the lower rate, then the smaller choice.

    ``candidates`` holds ``(choice, RdCost)`` pairs, or :class:`Candidate`
    objects together with ``lam``.
    """
    best, best_key = None, None
    for item in candidates:
        if isinstance(item, Candidate):
            choice, cost = item, rd_cost(item.rate, item.distortion, lam)
            order = item.choice
        else:
            choice, cost = item
            order = choice
        key = (cost.j, cost.rate, order)
        if best_key is None or key < best_key:
            best, best_key = choice, key
    if best is None:
        raise ConfigError("no candidates to select from")
    return best


def _select_all(table, lam):
    return {name: select_best(cands, lam) for name, cands in table.items()}


def _total_bits(sel):
    return sum(c.bits for c in sel.values())


@dataclass
class CompetitionResult:
    lam: float
    budget_bits: float
    selected: Dict[str, Candidate]  # after greedy refill
    lambda_selected: Dict[str, Candidate]  # lambda-argmin, before refill

    @property
    def total_bits(self):
        return _total_bits(self.selected)

    @property
    def utilization(self):
        return self.total_bits / self.budget_bits if self.budget_bits else 0.0

    def choices(self):
        return {n: c.choice for n, c in self.selected.items()}

    def to_json(self):
        rows = []
        for name, c in self.selected.items():
            rows.append({
                "sequence": name,
                "choice": c.choice.label(),
                "intra_period": c.choice.intra_period,
                "gop_size": c.choice.gop_size,
                "quality": c.choice.quality,
                "downsample": c.choice.downsample,
                "bits": c.bits,
                "ms_ssim": round(c.ms_ssim, 10),
                "ms_ssim_db": round(c.ms_ssim_db, 6),
                "psnr": round(c.psnr, 6),
                "refilled": c.choice != self.lambda_selected[name].choice,
            })
        return {
            "lambda": self.lam,
            "budget_bits": self.budget_bits,
            "total_bits": self.total_bits,
            "utilization": round(self.utilization, 9),
            "sequences": rows,
        }


def min_total_bits(table) -> int:
    return sum(min(c.bits for c in cands) for cands in table.values())


def fit_budget(table: Dict[str, List[Candidate]], budget_bits: int) -> CompetitionResult:
    """Shared-lambda selection that fits ``budget_bits``, then greedy refill."""
    if not table or any(not c for c in table.values()):
        raise ConfigError("every sequence needs at least one candidate")
    floor = min_total_bits(table)
    if budget_bits < floor:
        raise BudgetError(
            f"budget of {budget_bits} bits is below the smallest achievable total {floor}",
            min_total=floor,
        )
    sel = _select_all(table, 0.0)
    lam = 0.0
    if _total_bits(sel) > budget_bits:
        hi = 1e-9
        while _total_bits(_select_all(table, hi)) > budget_bits:
            hi *= 2.0
        lo = 0.0
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if _total_bits(_select_all(table, mid)) > budget_bits:
                lo = mid
            else:
                hi = mid
        lam = hi
        sel = _select_all(table, lam)
    lambda_sel = dict(sel)

    # spend what is left on the best distortion-per-bit upgrades
    headroom = budget_bits - _total_bits(sel)
    names = list(table)
    while True:
        best = None
        for i, name in enumerate(names):
            cur = sel[name]
            for c in table[name]:
                extra = c.bits - cur.bits
                gain = cur.distortion - c.distortion
                if extra <= 0 or gain <= 0 or extra > headroom:
                    continue
                key = (-gain / extra, i, c.choice)
                if best is None or key < best[0]:
                    best = (key, name, c)
        if best is None:
            break
        _, name, c = best
        headroom -= c.bits - sel[name].bits
        sel[name] = c

    # still under the utilization floor: take the moves that cost the least
    # distortion per extra bit (often none, e.g. a longer intra period twin).
    # Pointless when even the largest candidates cannot reach the floor.
    floor_bits = UTILIZATION_FLOOR * budget_bits
    reachable = sum(max(c.bits for c in cands) for cands in table.values()) >= floor_bits
    while reachable and budget_bits - headroom < floor_bits:
        best = None
        for i, name in enumerate(names):
            cur = sel[name]
            for c in table[name]:
                extra = c.bits - cur.bits
                if extra <= 0 or extra > headroom:
                    continue
                loss = max(c.distortion - cur.distortion, 0.0)
                key = (loss / extra, -extra, i, c.choice)
                if best is None or key < best[0]:
                    best = (key, name, c)
        if best is None:
            break
        _, name, c = best
        headroom -= c.bits - sel[name].bits
        sel[name] = c
    log.info("lambda %.6g, %d of %d bits", lam, _total_bits(sel), budget_bits)
    return CompetitionResult(lam, budget_bits, sel, lambda_sel)


# Aggregate rate-distortion curves over a dataset.

def aggregate_point(cands: Iterable[Candidate]):
    """(mean bits per second, dB of mean MS-SSIM) over one pick per sequence."""
    cands = list(cands)
    rate = sum(c.rate for c in cands) / len(cands)
    mean = sum(c.ms_ssim for c in cands) / len(cands)
    return rate, ms_ssim_db(min(max(mean, 0.0), 1.0))


def competition_curve(table, lambdas) -> list:
    return [aggregate_point(_select_all(table, lam).values()) for lam in lambdas]


def fixed_curve(table, intra_period, gop_size, downsample=False, qualities=QUALITIES) -> list:
    pts = []
    for q in qualities:
        want = CodingChoice(intra_period, gop_size, q, downsample)
        picks = [next((c for c in cands if c.choice == want), None) for cands in table.values()]
        if any(p is None for p in picks):
            raise ConfigError(f"{want.label()} missing from the candidate table")
        pts.append(aggregate_point(picks))
    return pts


# Candidate table persistence.

CSV_FIELDS = ["sequence", "intra_period", "gop_size", "quality", "downsample", "bits",
              "ms_ssim", "ms_ssim_db", "duration", "psnr"]


def write_candidates(table, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for name, cands in table.items():
            for c in cands:
                ch = c.choice
                w.writerow([name, ch.intra_period, ch.gop_size, ch.quality, int(ch.downsample),
                            c.bits, f"{c.ms_ssim:.10f}", f"{c.ms_ssim_db:.6f}",
                            repr(c.duration), f"{c.psnr:.6f}"])


def read_candidates(path) -> Dict[str, List[Candidate]]:
    table: Dict[str, List[Candidate]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                ch = CodingChoice(int(row["intra_period"]), int(row["gop_size"]),
                                  int(row["quality"]), bool(int(row["downsample"])))
                cand = Candidate(row["sequence"], ch, int(row["bits"]), float(row["duration"]),
                                 float(row["ms_ssim"]), float(row.get("psnr") or 0.0))
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"bad candidate row {row}: {exc}") from None
            table.setdefault(cand.sequence, []).append(cand)
    return table


def write_result(result: CompetitionResult, path):
    with open(path, "w") as fh:
        json.dump(result.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
