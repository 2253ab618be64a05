from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from pydantic import ValidationError as ConfigError

from .config import settings
from .core.errors import ConvergenceError, TensorIOError, ValidationError
from .core.schemas import MetricsReport, RunConfig
from .decomp.models import KruskalTensor, TuckerTensor
from .linked.cifa import CifaModel
from .persistence import codec
from .persistence.db import init_db, insert_run_report
from .pipelines import synth
from .pipelines.methods import COMPLETERS, DECOMPOSERS
from .pipelines.ssvep import ssvep_bench, ssvep_sweep
from .robust import patch_denoise, psnr, rrse


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_CONVERGENCE = 4

SSVEP_SNR_DB = -10.0


def _config(args: argparse.Namespace, command: str) -> RunConfig:
    values = {k: v for k, v in vars(args).items() if k in RunConfig.model_fields and v is not None}
    values["command"] = command
    return RunConfig.model_validate(values)


def _emit(report: MetricsReport, cfg: RunConfig, started: float) -> int:
    if cfg.timing:
        report = report.model_copy(update={"wall_seconds": time.perf_counter() - started})
    text = report.render(cfg.format)
    if cfg.report:
        try:
            Path(cfg.report).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise TensorIOError(f"cannot write report {cfg.report}: {exc.strerror or exc}") from exc
    else:
        sys.stdout.write(text)
    insert_run_report(report)
    return EXIT_OK


def _peak(truth: np.ndarray, cfg: RunConfig) -> float:
    if cfg.peak is not None:
        return cfg.peak
    peak = float(np.max(np.abs(truth)))
    if peak == 0.0:
        raise ValidationError("ground truth is identically zero; pass --peak")
    return peak


def _read_truth(cfg: RunConfig, shape: tuple) -> Optional[np.ndarray]:
    if not cfg.truth:
        return None
    truth = codec.read_tensor(cfg.truth)
    if truth.shape != shape:
        raise ValidationError(f"truth shape {truth.shape} does not match input shape {shape}")
    return truth


def _write_model(path: str, model: Any) -> None:
    if isinstance(model, KruskalTensor):
        codec.write_kruskal(path, model)
    elif isinstance(model, TuckerTensor):
        codec.write_tucker(path, model)
    elif isinstance(model, CifaModel):
        codec.write_cifa(path, model)
    else:  # pragma: no cover - registry only yields the three model types
        raise TypeError(f"no codec for {type(model).__name__}")


def cmd_decompose(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    cfg = _config(args, "decompose")
    method = DECOMPOSERS.get(cfg.method)
    data = [codec.read_tensor(p) for p in cfg.inputs]
    model, metrics = method.run(data=data, cfg=cfg)
    if cfg.output:
        _write_model(cfg.output, model)
    report = MetricsReport(command="decompose", method=method.name, params=cfg.echo(), metrics=metrics, seed=cfg.seed)
    return _emit(report, cfg, started)


def _completion_metrics(completed: np.ndarray, truth: Optional[np.ndarray], cfg: RunConfig) -> Dict[str, float]:
    if truth is None:
        return {}
    return {"rrse": rrse(truth, completed), "psnr": psnr(truth, completed, _peak(truth, cfg))}


def _method_output(output: str, method: str, many: bool) -> str:
    if not many:
        return output
    p = Path(output)
    return str(p.with_name(f"{p.stem}.{method}{p.suffix or '.tns'}"))


def cmd_complete(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    cfg = _config(args, "complete")
    methods = [COMPLETERS.get(name) for name in cfg.methods]
    y = codec.read_masked(cfg.inputs[0])
    truth = _read_truth(cfg, y.shape)
    base = {"observed_fraction": y.observed_fraction}

    if len(methods) == 1:
        completed = y.clamp(methods[0].run(y=y, cfg=cfg))
        if cfg.output:
            codec.write_tensor(cfg.output, completed)
        metrics = {**base, **_completion_metrics(completed, truth, cfg)}
        report = MetricsReport(command="complete", method=methods[0].name, params=cfg.echo(), metrics=metrics, seed=cfg.seed)
        return _emit(report, cfg, started)

    rows: List[Dict[str, Any]] = []
    for method in methods:
        result = method.safe_call(y=y, cfg=cfg)
        row: Dict[str, Any] = {"method": method.name, "success": result["success"]}
        if cfg.timing:
            row["latency_ms"] = result["latency_ms"]
        if result["success"]:
            completed = y.clamp(result["output"])
            row.update(_completion_metrics(completed, truth, cfg))
            if cfg.output:
                codec.write_tensor(_method_output(cfg.output, method.name, True), completed)
        else:
            row["error"] = result["output"]["error"]
        rows.append(row)
    report = MetricsReport(
        command="complete", method=",".join(m.name for m in methods), params=cfg.echo(), metrics=base, rows=rows, seed=cfg.seed
    )
    return _emit(report, cfg, started)


def cmd_denoise(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    cfg = _config(args, "denoise")
    method = (cfg.method or "hosvd").replace("-", "_")
    volume = codec.read_tensor(cfg.inputs[0])
    truth = _read_truth(cfg, volume.shape)
    denoised = patch_denoise(volume, cfg.patch, cfg.group, method, rank=cfg.rank or 4, seed=cfg.seed)
    if cfg.output:
        codec.write_tensor(cfg.output, denoised)
    metrics: Dict[str, float] = {}
    if truth is not None:
        peak = _peak(truth, cfg)
        before, after = psnr(truth, volume, peak), psnr(truth, denoised, peak)
        metrics.update({"psnr_before": before, "psnr_after": after, "psnr_gain": after - before})
    report = MetricsReport(command="denoise", method=method, params=cfg.echo(), metrics=metrics, seed=cfg.seed)
    return _emit(report, cfg, started)


def cmd_ssvep_bench(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    cfg = _config(args, "ssvep-bench")
    methods = cfg.methods or None
    if cfg.inputs:
        classes = [codec.read_tensor(p) for p in cfg.inputs]
        scores = ssvep_bench(classes, cfg.frequencies, cfg.fs, cfg.windows, methods)
    else:
        snr = SSVEP_SNR_DB if cfg.snr_db is None else cfg.snr_db
        seeds = range(cfg.seed, cfg.seed + cfg.n_seeds)
        scores = ssvep_sweep(seeds, snr, cfg.frequencies, cfg.channels, cfg.trials, cfg.fs, cfg.windows, methods)
    rows = [{"method": s.method, "window": s.window, "accuracy": s.accuracy, "decisions": s.decisions} for s in scores]
    metrics = {
        f"accuracy/{name}": float(np.mean([s.accuracy for s in scores if s.method == name]))
        for name in dict.fromkeys(s.method for s in scores)
    }
    report = MetricsReport(
        command="ssvep-bench", method=",".join(dict.fromkeys(s.method for s in scores)),
        params=cfg.echo(), metrics=metrics, rows=rows, seed=cfg.seed,
    )
    return _emit(report, cfg, started)


def _sibling(base: Path, tag: str, suffix: str) -> str:
    return str(base.with_name(f"{base.stem}{tag}{suffix}"))


def cmd_synth(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    cfg = _config(args, "synth")
    base = Path(cfg.output or "")
    files: List[Dict[str, Any]] = []

    def save(role: str, path: str, writer: Callable[[str, Any], None], value: Any) -> None:
        writer(path, value)
        files.append({"role": role, "file": path})

    if cfg.kind in ("cp", "tucker", "masked"):
        shape = cfg.shape or [10, 10, 10]
        if cfg.kind == "cp":
            model = synth.planted_cp(shape, cfg.rank or 3, cfg.seed)
            save("model", _sibling(base, "", ".kdt"), codec.write_kruskal, model)
        else:
            ranks = [2] * len(shape) if cfg.ranks in (None, "full") else cfg.ranks
            model = synth.planted_tucker(shape, ranks, cfg.seed)
            save("model", _sibling(base, "", ".tkt"), codec.write_tucker, model)
        clean = model.full()
        noisy = synth.add_noise(clean, cfg.noise * float(np.std(clean)), cfg.seed + 1) if cfg.noise else clean
        if cfg.kind == "masked":
            save("observed", _sibling(base, "", ".mtns"), codec.write_masked, synth.masked(noisy, cfg.missing, cfg.seed))
            save("truth", _sibling(base, ".truth", ".tns"), codec.write_tensor, clean)
        else:
            save("tensor", _sibling(base, "", ".tns"), codec.write_tensor, noisy)
    elif cfg.kind == "phantom":
        shape = tuple(cfg.shape or (32, 32, 32))
        if len(shape) != 3:
            raise ValidationError(f"phantom volumes are third-order, got shape {list(shape)}")
        clean = synth.phantom(shape, cfg.seed)
        save("tensor", _sibling(base, "", ".tns"), codec.write_tensor, synth.add_noise(clean, cfg.noise, cfg.seed + 1))
        save("truth", _sibling(base, ".truth", ".tns"), codec.write_tensor, clean)
    else:
        snr = SSVEP_SNR_DB if cfg.snr_db is None else cfg.snr_db
        classes = synth.synth_ssvep(cfg.frequencies, cfg.channels, cfg.trials, max(cfg.windows), snr, cfg.seed, cfg.fs)
        for k, block in enumerate(classes, start=1):
            save(f"class {k}", _sibling(base, f".class{k}", ".tns"), codec.write_tensor, block)

    report = MetricsReport(command="synth", method=str(cfg.kind), params=cfg.echo(), rows=files, seed=cfg.seed)
    return _emit(report, cfg, started)


def _int_list(raw: str) -> Any:
    if raw == "full":
        return raw
    try:
        return [int(v) for v in raw.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers or 'full', got {raw!r}") from exc


def _float_list(raw: str) -> List[float]:
    try:
        return [float(v) for v in raw.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {raw!r}") from exc


def _common_flags(p: argparse.ArgumentParser, *, input_required: bool = True) -> None:
    p.add_argument("--input", dest="inputs", nargs="+", required=input_required, help="Input file(s)")
    p.add_argument("--output", help="Output path for the result tensor or model")
    p.add_argument("--method", help="Solver name")
    p.add_argument("--rank", type=int, help="CP/matrix rank")
    p.add_argument("--ranks", type=_int_list, help="Multilinear ranks, e.g. 2,2,2 or 'full'")
    p.add_argument("--common", type=int, help="Number of common components C")
    p.add_argument("--seed", type=int, help=f"Random seed (default {settings.default_seed})")
    p.add_argument("--report", help="Write the report here instead of stdout")
    p.add_argument("--format", choices=["json", "csv"], help="Report format (default json)")
    p.add_argument("--timing", action="store_true", default=None, help="Include wall-clock seconds in the report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tenslink", description="Linked tensor component analysis")
    subparsers = parser.add_subparsers(dest="command")

    p = subparsers.add_parser("decompose", help="Factorize a tensor, a matrix or a set of linked blocks")
    _common_flags(p)
    p.add_argument("--lam", type=float, help="Sparsity (nmf) or smoothness (smca) penalty")
    p.add_argument("--lags", type=_int_list, help="Covariance lags for sobi")
    p.set_defaults(func=cmd_decompose)

    p = subparsers.add_parser("complete", help="Fill in the missing entries of a masked tensor")
    _common_flags(p)
    p.add_argument("--truth", help="Ground-truth .tns for RRSE/PSNR")
    p.add_argument("--tau", type=float, help="Final singular-value threshold for soft-impute")
    p.add_argument("--peak", type=float, help="PSNR peak value (default max |truth|)")
    p.set_defaults(func=cmd_complete)

    p = subparsers.add_parser("denoise", help="Patch-group low-rank denoising of a volume")
    _common_flags(p)
    p.add_argument("--truth", help="Clean .tns for PSNR before/after")
    p.add_argument("--patch", type=int, help="Cube edge length (default 4)")
    p.add_argument("--group", type=int, help="Cubes per group (default 8)")
    p.add_argument("--peak", type=float, help="PSNR peak value (default max |truth|)")
    p.set_defaults(func=cmd_denoise)

    p = subparsers.add_parser("ssvep-bench", help="SSVEP recognition accuracy per method and window")
    _common_flags(p, input_required=False)
    p.add_argument("--frequencies", type=_float_list, help="Stimulus frequencies in Hz (default 6,8,9,10)")
    p.add_argument("--fs", type=float, help="Sampling rate in Hz (default 250)")
    p.add_argument("--windows", type=_float_list, help="Window lengths in seconds (default 0.5,1,2,4)")
    p.add_argument("--snr", dest="snr_db", type=float, help=f"Synthetic SNR in dB (default {SSVEP_SNR_DB})")
    p.add_argument("--channels", type=int, help="Synthetic channel count (default 8)")
    p.add_argument("--trials", type=int, help="Synthetic trials per class (default 6)")
    p.add_argument("--seeds", dest="n_seeds", type=int, help="Synthetic recordings to average (default 10)")
    p.set_defaults(func=cmd_ssvep_bench)

    p = subparsers.add_parser("synth", help="Write seeded synthetic data with ground truth")
    _common_flags(p, input_required=False)
    p.add_argument("--kind", choices=["cp", "tucker", "masked", "phantom", "ssvep"], required=True)
    p.add_argument("--shape", type=_int_list, help="Tensor shape, e.g. 10,10,10")
    p.add_argument("--missing", type=float, help="Missing ratio for --kind masked (default 0.5)")
    p.add_argument("--noise", type=float, help="Noise level (relative std for cp/tucker/masked, absolute for phantom)")
    p.add_argument("--frequencies", type=_float_list, help="SSVEP stimulus frequencies in Hz")
    p.add_argument("--fs", type=float, help="SSVEP sampling rate in Hz")
    p.add_argument("--windows", type=_float_list, help="SSVEP trial length is the longest window")
    p.add_argument("--snr", dest="snr_db", type=float, help="SSVEP SNR in dB")
    p.add_argument("--channels", type=int)
    p.add_argument("--trials", type=int)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    ns = parser.parse_args(argv)

    if not hasattr(ns, "func"):
        parser.print_help()
        return EXIT_OK
    try:
        init_db()
        return int(ns.func(ns))
    except (ConfigError, ValidationError) as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except TensorIOError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConvergenceError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except Exception as exc:  # noqa: BLE001
        logger.exception("unexpected failure")
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    raise SystemExit(main())
