"""Command-line frontend.

Subcommands: compress, decompress, delta, patch, inspect, hist, plan.
Exit codes: 0 success, 1 usage error, 2 data/corruption error, 3 I/O error.
Reports go to stdout, diagnostics to stderr; `-` means stdin/stdout in raw
mode.  All commands are non-interactive and deterministic for fixed inputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from . import ingest
from .analysis import exponent_histogram, sample_middle
from .codecs import SelectionMode
from .container import Method, container_from_bytes, decode_header
from .delta import ScheduleMode, plan_bases
from .dtypes import DTYPES_BY_NAME, OPAQUE
from .errors import ZnnError
from .pipeline import CompressConfig, DEFAULT_CHUNK_SIZE

_MODES = {
    "model": SelectionMode.MODEL,
    "auto": SelectionMode.DELTA_AUTO,
    "huffman": SelectionMode.FORCE_HUFFMAN,
    "lz": SelectionMode.FORCE_LZ,
    "stored": SelectionMode.FORCE_STORED,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    p = _Parser(prog="znn", description="Lossless compression for model weight files")
    sub = p.add_subparsers(dest="command", required=True)

    def common(s, mode_default="model"):
        s.add_argument("--dtype", choices=sorted(DTYPES_BY_NAME), default=None,
                       help="raw mode: treat the whole file as this element type")
        s.add_argument("--chunk-kb", type=int, default=DEFAULT_CHUNK_SIZE // 1024,
                       help="chunk size in KB (default 256)")
        s.add_argument("--mode", choices=sorted(_MODES), default=mode_default)
        s.add_argument("--threads", type=int, default=1)

    c = sub.add_parser("compress", help="compress a model file to .znn")
    c.add_argument("input")
    c.add_argument("-o", "--output", required=True)
    common(c)
    c.add_argument("--json", action="store_true", help="emit a JSON report")

    d = sub.add_parser("decompress", help="restore the original file from .znn")
    d.add_argument("input")
    d.add_argument("-o", "--output", required=True)
    d.add_argument("--threads", type=int, default=1)

    dl = sub.add_parser("delta", help="compress target as an XOR delta against a base")
    dl.add_argument("--base", required=True)
    dl.add_argument("target")
    dl.add_argument("-o", "--output", required=True)
    common(dl, mode_default="auto")
    dl.add_argument("--json", action="store_true")

    pt = sub.add_parser("patch", help="apply a delta to its base")
    pt.add_argument("--base", required=True)
    pt.add_argument("delta")
    pt.add_argument("-o", "--output", required=True)
    pt.add_argument("--threads", type=int, default=1)

    ins = sub.add_parser("inspect", help="show container metadata and method histogram")
    ins.add_argument("input")
    ins.add_argument("--json", action="store_true")

    h = sub.add_parser("hist", help="exponent histogram of a model file")
    h.add_argument("input")
    h.add_argument("--dtype", choices=sorted(DTYPES_BY_NAME), default=None)
    h.add_argument("--sample", default=None, metavar="middle:N",
                   help="histogram only N bytes from the middle of the stream")
    h.add_argument("--json", action="store_true")

    pl = sub.add_parser("plan", help="emit a periodic-base checkpoint schedule as JSON")
    pl.add_argument("n_checkpoints", type=int)
    pl.add_argument("--period", type=int, required=True)
    pl.add_argument("--schedule-mode", choices=["chain", "fixed_base"], default="chain")
    return p


def _config(args, dtype=None) -> CompressConfig:
    return CompressConfig(
        dtype=dtype or OPAQUE,
        chunk_size=args.chunk_kb * 1024,
        mode=_MODES[args.mode],
        worker_count=args.threads,
    )


def _pct(compressed: int, raw: int) -> float:
    return round(compressed / raw * 100, 1) if raw else 0.0


def _report_rows(stats_rows, tensor_rows):
    rows = []
    for st, row in zip(stats_rows, tensor_rows):
        header = st["header"]
        lens = st["stored_lens"]
        groups_pct = []
        group_raw = sum(header.group_raw_len(c) for c in range(header.chunk_count))
        for g in range(header.dtype.group_count):
            stored = int(lens[:, g].sum())
            groups_pct.append(_pct(stored, group_raw))
        rows.append({
            "name": row["name"],
            "dtype": row["dtype"],
            "raw_bytes": row["data_len"],
            "compressed_pct": _pct(row["container_len"], row["data_len"]),
            "groups_pct": groups_pct,
        })
    return rows


def _cmd_compress(args) -> int:
    import os

    to_stdout = args.output == "-"
    from_stdin = args.input == "-"
    raw_dtype = DTYPES_BY_NAME[args.dtype] if args.dtype else (OPAQUE if from_stdin else None)
    cfg = _config(args, raw_dtype)

    if from_stdin or to_stdout:
        data = sys.stdin.buffer.read() if from_stdin else ingest.map_file(args.input)
        if raw_dtype is None:
            raw_dtype = OPAQUE
        out = sys.stdout.buffer if to_stdout else open(args.output, "wb")
        try:
            st = ingest.write_container(
                np.frombuffer(data, dtype=np.uint8) if isinstance(data, bytes) else data,
                replace(cfg, dtype=raw_dtype), out)
        finally:
            if not to_stdout:
                out.close()
        raw, comp = st["raw_bytes"], st["container_bytes"]
        report = {"file": args.input, "output": args.output, "raw_bytes": raw,
                  "container_bytes": comp, "total_pct": _pct(comp, raw)}
        dest = sys.stderr if to_stdout else sys.stdout
        if args.json:
            print(json.dumps(report, indent=2), file=dest)
        else:
            print(f"{report['total_pct']:.1f}%", file=dest)
        return 0

    res = ingest.compress_model_file(args.input, args.output, cfg, raw_dtype)
    comp = os.path.getsize(args.output)
    if "raw" in res:
        raw = res["raw"]["raw_bytes"]
        tensors = _report_rows([res["raw"]], [{
            "name": "<raw>", "dtype": (raw_dtype or OPAQUE).name,
            "data_len": raw, "container_len": comp,
        }])
    else:
        raw = res["file_size"]
        tensors = _report_rows(res["stats"], res["tensors"])
    report = {"file": args.input, "output": args.output, "raw_bytes": raw,
              "container_bytes": comp, "total_pct": _pct(comp, raw), "tensors": tensors}
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        print(f"{report['total_pct']:.1f}%")
    return 0


def _cmd_decompress(args) -> int:
    if args.input == "-" or args.output == "-":
        data = sys.stdin.buffer.read() if args.input == "-" else bytes(ingest.map_file(args.input))
        from .pipeline import decompress_stream

        out_bytes = decompress_stream(container_from_bytes(data), args.threads)
        if args.output == "-":
            sys.stdout.buffer.write(out_bytes)
        else:
            with open(args.output, "wb") as f:
                f.write(out_bytes)
        return 0
    ingest.decompress_model_file(args.input, args.output, args.threads)
    return 0


def _cmd_delta(args) -> int:
    import os

    raw_dtype = DTYPES_BY_NAME[args.dtype] if args.dtype else None
    cfg = _config(args, raw_dtype)
    res = ingest.delta_model_file(args.base, args.target, args.output, cfg, raw_dtype)
    report = {"base": args.base, "target": args.target, "output": args.output,
              "raw_bytes": res["raw_bytes"],
              "container_bytes": os.path.getsize(args.output),
              "total_pct": _pct(os.path.getsize(args.output), res["raw_bytes"])}
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        print(f"{report['total_pct']:.1f}%")
    return 0


def _cmd_patch(args) -> int:
    ingest.patch_model_file(args.base, args.delta, args.output, args.threads)
    return 0


def _method_histogram(methods) -> dict:
    out = {}
    for g in range(methods.shape[1]):
        counts = np.bincount(methods[:, g], minlength=4)
        out[f"group{g}"] = {m.name.lower(): int(counts[m]) for m in Method if counts[m]}
    return out


def _cmd_inspect(args) -> int:
    import os

    data = ingest.map_file(args.input)
    header = decode_header(data)
    size = os.path.getsize(args.input)
    if header.safetensors:
        env = ingest.read_envelope(data)
        tensors = []
        agg: dict = {}
        for i, row in enumerate(env.manifest["tensors"]):
            inner = env.inner_container(i)
            hist = _method_histogram(inner.methods)
            for g, methods in hist.items():
                for m, n in methods.items():
                    agg.setdefault(g, {}).setdefault(m, 0)
                    agg[g][m] += n
            tensors.append({
                "name": row["name"], "dtype": row["dtype"],
                "raw_bytes": row["data_len"],
                "compressed_pct": _pct(row["container_len"], row["data_len"]),
            })
        doc = {
            "file": args.input, "kind": "safetensors-envelope",
            "delta": header.delta, "chunk_size": header.chunk_size,
            "raw_bytes": env.manifest["file_size"], "container_bytes": size,
            "total_pct": _pct(size, env.manifest["file_size"]),
            "method_histogram": agg, "tensors": tensors,
        }
    else:
        container = container_from_bytes(data)
        doc = {
            "file": args.input, "kind": "container",
            "dtype": header.dtype.name, "delta": header.delta,
            "chunk_size": header.chunk_size, "chunk_count": header.chunk_count,
            "group_count": header.dtype.group_count,
            "raw_bytes": header.total_size, "container_bytes": size,
            "total_pct": _pct(size, header.total_size),
            "checksum": f"{container.checksum:08x}",
            "method_histogram": _method_histogram(container.methods),
        }
    if args.json:
        print(json.dumps(doc, indent=2))
    else:
        for k, v in doc.items():
            if k in ("method_histogram", "tensors"):
                print(f"{k}:")
                items = v.items() if isinstance(v, dict) else ((t["name"], t) for t in v)
                for name, val in items:
                    print(f"  {name}: {val}")
            else:
                print(f"{k}: {v}")
    return 0


def _parse_sample(spec: str | None) -> int | None:
    if spec is None:
        return None
    kind, _, n = spec.partition(":")
    if kind != "middle" or not n.isdigit():
        raise ZnnError(f"bad --sample spec {spec!r}, expected middle:N")
    return int(n)


def _cmd_hist(args) -> int:
    data = ingest.map_file(args.input)
    sample_n = _parse_sample(args.sample)
    histograms: dict[str, np.ndarray] = {}
    if args.dtype:
        dtype = DTYPES_BY_NAME[args.dtype]
        buf = bytes(data)
        if sample_n is not None:
            buf = sample_middle(buf, sample_n, dtype.element_bytes)
        histograms[dtype.name] = exponent_histogram(buf, dtype)
    else:
        _, spans = ingest.parse_safetensors(data)
        blob_len = 8 + int.from_bytes(bytes(memoryview(data)[:8]), "little")
        region = np.frombuffer(data, dtype=np.uint8, offset=blob_len) \
            if len(data) > blob_len else np.empty(0, dtype=np.uint8)
        by_dtype: dict[str, list] = {}
        for s in spans:
            if not s.dtype.is_opaque:
                by_dtype.setdefault(s.dtype.name, []).append(region[s.start:s.end])
        for name, parts in by_dtype.items():
            stream = np.concatenate(parts) if len(parts) > 1 else parts[0]
            dtype = DTYPES_BY_NAME[name]
            if sample_n is not None:
                stream = np.frombuffer(
                    sample_middle(stream, sample_n, dtype.element_bytes), dtype=np.uint8)
            histograms[name] = exponent_histogram(np.ascontiguousarray(stream), dtype)
    if args.json:
        print(json.dumps({k: v.tolist() for k, v in histograms.items()}))
    else:
        for name, counts in histograms.items():
            print(f"[{name}]")
            for v in np.nonzero(counts)[0]:
                print(f"  {int(v):3d}: {int(counts[v])}")
    return 0


def _cmd_plan(args) -> int:
    schedule = plan_bases(args.n_checkpoints, args.period, ScheduleMode(args.schedule_mode))
    print(schedule.to_json())
    return 0


_COMMANDS = {
    "compress": _cmd_compress,
    "decompress": _cmd_decompress,
    "delta": _cmd_delta,
    "patch": _cmd_patch,
    "inspect": _cmd_inspect,
    "hist": _cmd_hist,
    "plan": _cmd_plan,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ZnnError as e:
        print(f"znn: {e.code}: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"znn: io error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
