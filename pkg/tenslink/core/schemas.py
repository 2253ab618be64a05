from __future__ import annotations

import csv
import io
import json
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from ..config import settings


Command = Literal["decompose", "complete", "denoise", "ssvep-bench", "synth"]

SINGLE_INPUT = ("complete", "denoise")


class RunConfig(BaseModel):
    """Validated parameters of one CLI invocation."""

    model_config = {"extra": "forbid"}

    command: Command
    inputs: List[str] = Field(default_factory=list, description="Input file(s); ssvep-bench takes one per stimulus")
    output: Optional[str] = Field(default=None, description="Result tensor/model path (synth: output prefix)")
    report: Optional[str] = Field(default=None, description="Report destination; stdout when omitted")
    truth: Optional[str] = Field(default=None, description="Ground-truth .tns for RRSE/PSNR")
    method: Optional[str] = Field(default=None, description="Solver name, comma separated for complete")
    rank: Optional[int] = Field(default=None, ge=1)
    ranks: Optional[Union[Literal["full"], List[int]]] = None
    common: Optional[int] = Field(default=None, ge=0, description="Number of common components C")
    lam: Optional[float] = Field(default=None, gt=0)
    tau: Optional[float] = Field(default=None, gt=0)
    lags: Optional[List[int]] = None
    seed: int = Field(default_factory=lambda: settings.default_seed)
    format: Literal["json", "csv"] = "json"
    timing: bool = False

    patch: int = Field(default=4, ge=2)
    group: int = Field(default=8, ge=1)
    peak: Optional[float] = Field(default=None, gt=0)

    frequencies: List[float] = Field(default_factory=lambda: [6.0, 8.0, 9.0, 10.0])
    fs: float = Field(default=250.0, gt=0)
    windows: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0, 4.0])
    snr_db: Optional[float] = None
    channels: int = Field(default=8, ge=1)
    trials: int = Field(default=6, ge=1)
    n_seeds: int = Field(default=10, ge=1)

    kind: Optional[Literal["cp", "tucker", "masked", "phantom", "ssvep"]] = None
    shape: Optional[List[int]] = None
    missing: float = Field(default=0.5, ge=0.0, lt=1.0)
    noise: float = Field(default=0.0, ge=0.0)

    @field_validator("ranks", "shape", "lags")
    @classmethod
    def _positive_entries(cls, v: Any) -> Any:
        if isinstance(v, list):
            if not v:
                raise ValueError("must not be empty")
            if any(int(x) < 1 for x in v):
                raise ValueError(f"entries must be positive, got {v}")
        return v

    @field_validator("windows")
    @classmethod
    def _positive_windows(cls, v: List[float]) -> List[float]:
        if not v or any(w <= 0 for w in v):
            raise ValueError(f"windows must be positive seconds, got {v}")
        return v

    @field_validator("frequencies")
    @classmethod
    def _distinct_frequencies(cls, v: List[float]) -> List[float]:
        if len(v) < 2 or len(set(v)) != len(v) or any(f <= 0 for f in v):
            raise ValueError(f"need at least two distinct positive frequencies, got {v}")
        return v

    @model_validator(mode="after")
    def _check_command(self) -> "RunConfig":
        if self.command in SINGLE_INPUT and len(self.inputs) != 1:
            raise ValueError(f"{self.command} takes exactly one --input")
        if self.command == "decompose":
            if not self.inputs:
                raise ValueError("decompose needs --input")
            if not self.method:
                raise ValueError("decompose needs --method")
        if self.command == "complete" and not self.method:
            raise ValueError("complete needs --method")
        if self.command == "ssvep-bench" and self.inputs and len(self.inputs) != len(self.frequencies):
            raise ValueError(f"{len(self.inputs)} class files given for {len(self.frequencies)} frequencies")
        if self.command == "synth":
            if self.kind is None:
                raise ValueError("synth needs --kind")
            if not self.output:
                raise ValueError("synth needs --output")
        return self

    @property
    def methods(self) -> List[str]:
        return [m.strip() for m in (self.method or "").split(",") if m.strip()]

    def echo(self) -> Dict[str, Any]:
        """Explicitly set parameters, minus paths and output options."""
        skip = {"command", "inputs", "output", "report", "truth", "format", "timing", "seed"}
        return {k: v for k, v in self.model_dump(exclude_unset=True, exclude_none=True).items() if k not in skip}


class MetricsReport(BaseModel):
    """Outcome of one run; serializes with sorted keys so reruns diff cleanly."""

    model_config = {"extra": "forbid"}

    command: str
    method: str
    params: Dict[str, Any] = Field(default_factory=dict)
    metrics: Dict[str, float] = Field(default_factory=dict)
    rows: List[Dict[str, Any]] = Field(default_factory=list, description="One entry per compared method/window")
    seed: Optional[int] = None
    wall_seconds: Optional[float] = Field(default=None, description="Only populated with --timing")

    def to_json(self) -> str:
        return json.dumps(self.model_dump(exclude_none=True), sort_keys=True, separators=(",", ":"))

    def to_csv(self) -> str:
        records = self.rows or [dict(self.metrics)]
        columns = sorted({key for r in records for key in r})
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for r in records:
            writer.writerow({k: r.get(k, "") for k in columns})
        return buf.getvalue()

    def render(self, fmt: str = "json") -> str:
        return self.to_csv() if fmt == "csv" else self.to_json() + "\n"
