"""Command-line client for the dldkit service.

Every subcommand is a thin client: it reads local files, calls the HTTP API
(an in-process app instance by default, or a remote server via --server),
and writes the results back to disk. One-line machine-parseable summaries go
to stdout; diagnostics go to stderr.

Exit codes: 0 ok, 2 parse/config error, 3 vocabulary too small,
4 gt/pred id mismatch, 5 insufficient epochs, 6 training divergence.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .svgplot import curve_svg

EXIT_CODES = {
    "MalformedLine": 2,
    "EmptyCategory": 2,
    "InvalidRatio": 2,
    "InvalidParams": 2,
    "IllConditioned": 2,
    "ValueError": 2,
    "ScheduleSingular": 2,
    "VocabularyTooSmall": 3,
    "IdMismatch": 4,
    "InsufficientPoints": 5,
    "DivergenceDetected": 6,
}


class CliError(Exception):
    def __init__(self, message: str, code: int = 2):
        super().__init__(message)
        self.code = code


class Client:
    """HTTP wrapper; talks to an in-process app unless a server URL is given."""

    def __init__(self, server: str | None = None):
        if server:
            import httpx

            self._client = httpx.Client(base_url=server, timeout=600.0)
        else:
            from fastapi.testclient import TestClient

            from .service import app

            self._client = TestClient(app)

    def post(self, path: str, payload: dict) -> dict:
        resp = self._client.post(path, json=payload)
        if resp.status_code >= 400:
            detail = resp.json().get("detail", {})
            if isinstance(detail, dict) and "error" in detail:
                code = EXIT_CODES.get(detail["error"], 2)
                raise CliError(f"{detail['error']}: {detail['message']}", code)
            raise CliError(f"HTTP {resp.status_code}: {resp.text}", 2)
        return resp.json()


def _read_label_dir(path: Path) -> list[dict]:
    if not path.is_dir():
        raise CliError(f"not a directory: {path}")
    # inject-noise drops noise_record.txt next to the label files it writes.
    files = sorted(f for f in path.glob("*.txt") if f.name != "noise_record.txt")
    if not files:
        raise CliError(f"no .txt label files in {path}")
    return [{"image_id": f.stem, "text": f.read_text()} for f in files]


def cmd_inject_noise(args, client: Client) -> int:
    files = _read_label_dir(Path(args.in_dir))
    payload = {"files": files, "ratio": args.ratio, "seed": args.seed}
    if args.vocab:
        vocab_path = Path(args.vocab)
        if not vocab_path.is_file():
            raise CliError(f"vocabulary file not found: {vocab_path}")
        payload["vocabulary"] = vocab_path.read_text().split()
    result = client.post("/annotations/inject-noise", payload)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for f in result["files"]:
        (out_dir / f"{f['image_id']}.txt").write_text(f["text"])
    (out_dir / "noise_record.txt").write_text(result["record"])
    print(
        f"inject-noise total={result['total_instances']} "
        f"changed={result['changed']} out={out_dir}"
    )
    return 0


def cmd_eval(args, client: Client) -> int:
    payload = {
        "gt_files": _read_label_dir(Path(args.gt)),
        "pred_files": _read_label_dir(Path(args.pred)),
        "iou_threshold": args.iou,
        "ap_mode": args.ap_mode,
    }
    if args.record:
        record_path = Path(args.record)
        if not record_path.is_file():
            raise CliError(f"record file not found: {record_path}")
        payload["record"] = record_path.read_text()
    result = client.post("/metrics/evaluate", payload)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.csv").write_text(result["report_csv"])
    (out_dir / "report.txt").write_text(result["report_text"])
    summary = f"eval mAP={result['mean_ap']!r} ACC={result['acc']!r}"
    if result["map_correct"] is not None:
        summary += (
            f" mAPC={result['map_correct']!r} mAPI={result['map_incorrect']!r}"
        )
    print(summary)
    return 0


def _read_series_csv(path: Path, metric: str) -> tuple[list[int], list[float]]:
    if not path.is_file():
        raise CliError(f"log file not found: {path}")
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise CliError(f"empty CSV: {path}")
    header = [h.strip() for h in lines[0].split(",")]
    if "epoch" not in header or metric not in header:
        raise CliError(f"CSV must have 'epoch' and {metric!r} columns, got {header}")
    e_col, m_col = header.index("epoch"), header.index(metric)
    epochs, values = [], []
    for line_no, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        try:
            epochs.append(int(cells[e_col]))
            values.append(float(cells[m_col]))
        except (ValueError, IndexError):
            raise CliError(f"{path}:{line_no}: malformed row {line!r}") from None
    return epochs, values


def cmd_detect_el(args, client: Client) -> int:
    epochs, values = _read_series_csv(Path(args.log), args.metric)
    if args.scale == "percent":
        values = [v / 100.0 for v in values]
    result = client.post(
        "/dynamics/detect-el",
        {
            "epochs": epochs,
            "values": values,
            "metric": args.metric,
            "eta": args.eta,
            "degree": args.degree,
            "min_epochs": args.min_epochs,
        },
    )
    Path(args.out).write_text(result["trace_csv"])
    el = result["el"]
    print(f"EL={'none' if el is None else el}")
    if result["degenerate"]:
        print("warning: degenerate flat curvature at first candidate epoch", file=sys.stderr)
    return 0


_TRAIN_KEYS = {
    "num_classes": int, "dim": int, "n_samples": int, "separation": float,
    "ratio": float, "hidden": int, "lr": float, "batch_size": int, "epochs": int,
    "loss_mode": str, "epsilon": float, "k_fraction": float, "schedule": str,
    "tau": float, "el": int, "el_mode": str, "eta": float, "degree": int,
    "min_epochs": int, "el_offset": int, "seed": int,
}

_SWEEP_KEYS = {
    "rho_grid": lambda s: [float(v) for v in s.split(",")],
    "k_grid": lambda s: [float(v) for v in s.split(",")],
    "el_offset_grid": lambda s: [int(v) for v in s.split(",")],
    "loss_modes": lambda s: s.split(","),
}


def _read_config(path: Path, extra_keys: dict | None = None) -> dict:
    if not path.is_file():
        raise CliError(f"config file not found: {path}")
    keys = dict(_TRAIN_KEYS)
    if extra_keys:
        keys.update(extra_keys)
    config = {}
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"{path}:{line_no}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in keys:
            raise CliError(f"{path}:{line_no}: unknown key {key!r}")
        try:
            config[key] = keys[key](value)
        except ValueError:
            raise CliError(f"{path}:{line_no}: bad value for {key}: {value!r}") from None
    return config


def cmd_train(args, client: Client) -> int:
    config = _read_config(Path(args.config))
    result = client.post("/train", config)
    out = Path(args.out)
    out.write_text(result["log_csv"])
    el = result["el"]
    print(f"train log={out} EL={'none' if el is None else el}")
    if result["el_never_detected"]:
        print("warning: EL never detected; decay never activated", file=sys.stderr)
    if args.plot:
        rows = [r.split(",") for r in result["log_csv"].splitlines()[1:]]
        acc = [(float(r[0]), float(r[1])) for r in rows]
        clean = [(float(r[0]), float(r[2])) for r in rows]
        svg = curve_svg(
            {"acc_vs_noisy": acc, "acc_vs_clean": clean},
            title="training accuracy",
            mark_x=None if el is None else float(el),
        )
        Path(args.plot).write_text(svg)
    return 0


def cmd_sweep(args, client: Client) -> int:
    config = _read_config(Path(args.config), _SWEEP_KEYS)
    if args.seeds is not None:
        config["seeds"] = list(range(args.seeds))
    result = client.post("/sweep", config)
    out = Path(args.out)
    out.write_text(result["sweep_csv"])
    n_rows = len(result["sweep_csv"].splitlines()) - 1
    print(f"sweep rows={n_rows} out={out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dldkit", description="noisy-label detection toolkit"
    )
    parser.add_argument("--server", help="remote service URL (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inject-noise", help="corrupt category labels in DOTA files")
    p.add_argument("in_dir")
    p.add_argument("out_dir")
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vocab", help="whitespace-separated category vocabulary file")
    p.set_defaults(func=cmd_inject_noise)

    p = sub.add_parser("eval", help="mAP/ACC evaluation of predictions vs labels")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--record", help="noise record for mAPC/mAPI")
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--ap-mode", choices=["voc07_11point", "all_point"],
                   default="voc07_11point")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("detect-el", help="early-learning endpoint from an epoch CSV")
    p.add_argument("--log", required=True)
    p.add_argument("--metric", default="acc")
    p.add_argument("--eta", type=float, default=0.001)
    p.add_argument("--degree", type=int, default=4)
    p.add_argument("--min-epochs", type=int, default=6)
    p.add_argument("--scale", choices=["fraction", "percent"], default="fraction")
    p.add_argument("--out", default="el_trace.csv")
    p.set_defaults(func=cmd_detect_el)

    p = sub.add_parser("train", help="run the synthetic training harness")
    p.add_argument("config")
    p.add_argument("--out", default="train_log.csv")
    p.add_argument("--plot", help="write an SVG accuracy plot to this path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="grid sweep over noise/decay settings")
    p.add_argument("config")
    p.add_argument("--seeds", type=int, help="use seeds 0..n-1")
    p.add_argument("--out", default="sweep.csv")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        client = Client(args.server)
        return args.func(args, client)
    except CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
