"""Challenge-style run reports: per-sequence rows, totals and an options histogram."""

from __future__ import annotations

import os
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Optional

from .competition import CodingChoice


@dataclass
class ReportRow:
    sequence: str
    choice: CodingChoice
    bits: int
    ms_ssim_db: float
    psnr: float
    decode_seconds: Optional[float] = None


@dataclass
class RunReport:
    rows: List[ReportRow]
    budget_bits: Optional[int] = None
    lam: Optional[float] = None

    @property
    def total_bits(self) -> int:
        return sum(r.bits for r in self.rows)

    @property
    def data_mbytes(self) -> float:
        return self.total_bits / 8 / 1e6

    @property
    def mean_psnr(self) -> float:
        return sum(r.psnr for r in self.rows) / len(self.rows) if self.rows else 0.0

    @property
    def total_decode_seconds(self) -> Optional[float]:
        times = [r.decode_seconds for r in self.rows]
        if not times or any(t is None for t in times):
            return None
        return sum(times)

    def histogram(self) -> Dict[str, Counter]:
        return {
            "intra period": Counter(r.choice.intra_period for r in self.rows),
            "GOP size": Counter(r.choice.gop_size for r in self.rows),
            "quality": Counter(r.choice.quality for r in self.rows),
            "downsampling": Counter("yes" if r.choice.downsample else "no" for r in self.rows),
        }


def report_from_result(result_json: dict, decode_times: Optional[Dict[str, float]] = None) -> RunReport:
    decode_times = decode_times or {}
    rows = []
    for s in result_json["sequences"]:
        choice = CodingChoice(s["intra_period"], s["gop_size"], s["quality"], bool(s["downsample"]))
        rows.append(ReportRow(s["sequence"], choice, int(s["bits"]), float(s["ms_ssim_db"]),
                              float(s["psnr"]), decode_times.get(s["sequence"])))
    return RunReport(rows, result_json.get("budget_bits"), result_json.get("lambda"))


def package_size_bytes() -> int:
    here = os.path.dirname(os.path.abspath(__file__))
    return sum(os.path.getsize(os.path.join(here, f)) for f in os.listdir(here) if f.endswith(".py"))


def _fmt_time(t):
    return "n/a" if t is None else f"{t:.3f}"


def render_markdown(report: RunReport) -> str:
    out = ["# Competition report", ""]
    if report.budget_bits is not None:
        out.append(f"Budget: {report.budget_bits} bits ({report.budget_bits / 8 / 1e6:.6f} MBytes)")
    if report.lam is not None:
        out.append(f"Lambda: {report.lam:.6g}")
    out += ["", "| Sequence | Intra period | GOP | Quality | Downsample | Bits | MS-SSIM [dB] | PSNR [dB] | Decoding time [s] |",
            "|---|---|---|---|---|---|---|---|---|"]
    for r in report.rows:
        c = r.choice
        out.append(f"| {r.sequence} | {c.intra_period} | {c.gop_size} | {c.quality} | "
                   f"{'yes' if c.downsample else 'no'} | {r.bits} | {r.ms_ssim_db:.3f} | "
                   f"{r.psnr:.3f} | {_fmt_time(r.decode_seconds)} |")
    out += [
        "",
        "## Totals",
        "",
        "| Decoder size [MBytes] | Data size [MBytes] | Total bits | PSNR [dB] | Decoding time [s] |",
        "|---|---|---|---|---|",
        f"| {package_size_bytes() / 1e6:.3f} (Python sources, not comparable to model weights) | "
        f"{report.data_mbytes:.6f} | {report.total_bits} | {report.mean_psnr:.3f} | "
        f"{_fmt_time(report.total_decode_seconds)} |",
        "",
        "## Coding options selected",
        "",
    ]
    for title, counts in report.histogram().items():
        out += [f"| {title} | sequences |", "|---|---|"]
        for key in sorted(counts):
            out.append(f"| {key} | {counts[key]} |")
        out.append("")
    return "\n".join(out)
