"""Command-line client for the enhancement/compression service.

Without --server the app runs in-process and commands behave like a local
tool; with --server the same requests go to a remote instance.

Exit codes: 0 ok, 1 usage error, 2 data mismatch, 3 infeasible target,
4 corrupt model. MELMASK_THREADS controls search parallelism.
"""
from __future__ import annotations

import argparse
import base64
import csv
import json
import os
import sys

_EXIT_BY_CODE = {"usage": 1, "data_mismatch": 2, "infeasible": 3,
                 "corrupt_model": 4, "not_found": 1, "internal": 1}


class CliError(Exception):
    def __init__(self, exit_code: int, message: str):
        super().__init__(message)
        self.exit_code = exit_code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(1, f"{self.prog}: {message}")


def _client(server: str | None):
    if server:
        import httpx
        return httpx.Client(base_url=server.rstrip("/"), timeout=3600.0)
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # starlette testclient import chatter
        from fastapi.testclient import TestClient

    from .service import create_app
    return TestClient(create_app())


def _check(resp):
    if resp.status_code < 400:
        return resp
    try:
        detail = resp.json().get("detail", {})
    except ValueError:
        detail = {}
    if isinstance(detail, dict) and "code" in detail:
        code, message = detail["code"], detail.get("message", "")
    else:
        code, message = "internal", str(detail) or resp.text
    raise CliError(_EXIT_BY_CODE.get(code, 1), message)


def _read_file(path, what: str) -> bytes:
    try:
        with open(path, "rb") as f:
            return f.read()
    except OSError as e:
        raise CliError(1, f"cannot read {what} {path!r}: {e}") from None


def _upload_model(client, path) -> str:
    resp = _check(client.post("/models", content=_read_file(path, "model")))
    return resp.json()["model_id"]


def _write(path, data: bytes, what: str):
    try:
        with open(path, "wb") as f:
            f.write(data)
    except OSError as e:
        raise CliError(1, f"cannot write {what} {path!r}: {e}") from None


def cmd_enhance(args) -> int:
    with _client(args.server) as client:
        mid = _upload_model(client, args.model)
        resp = _check(client.post(f"/models/{mid}/enhance",
                                  content=_read_file(args.input, "audio")))
        _write(args.output, resp.content, "audio")
    print(f"wrote {args.output}")
    return 0


def _parse_plan(text: str) -> dict[str, float]:
    plan = {}
    for part in text.split(","):
        if "=" not in part:
            raise CliError(1, f"plan entries look like layer=fraction, got {part!r}")
        name, value = part.split("=", 1)
        try:
            plan[name.strip()] = float(value)
        except ValueError:
            raise CliError(1, f"bad fraction {value!r} for layer {name!r}") from None
    return plan


def cmd_prune(args) -> int:
    if (args.target is None) == (args.plan is None):
        raise CliError(1, "provide exactly one of --target or --plan")
    body = {"structure": args.structure}
    if args.target is not None:
        body["target"] = args.target
    else:
        body["per_layer"] = _parse_plan(args.plan)
    with _client(args.server) as client:
        mid = _upload_model(client, args.model)
        resp = _check(client.post(f"/models/{mid}/prune", json=body))
        payload = resp.json()
        new_id = payload["model"]["model_id"]
        data = _check(client.get(f"/models/{new_id}/file")).content
        _write(args.output, data, "model")
        if args.report:
            _write(args.report, json.dumps(payload["report"], indent=2).encode(), "report")
    rep = payload["report"]
    print(f"wrote {args.output}: overall sparsity "
          f"{rep['overall_sparsity']:.4f}, speedup {rep['speedup']:.2f}x, "
          f"{rep['footprint']['total_bytes']} bytes")
    return 0


def _load_metrics_rows(path) -> list[dict]:
    rows = []
    try:
        with open(path, newline="") as f:
            for row in csv.reader(f):
                if not row or row[0].strip().lower() in ("utterance", "id", "utt"):
                    continue
                if len(row) < 3:
                    raise CliError(1, "metric rows must be: utterance, stoi, pesq")
                rows.append({"id": row[0].strip(),
                             "stoi": float(row[1]), "pesq": float(row[2])})
    except OSError as e:
        raise CliError(1, f"cannot read metrics {path!r}: {e}") from None
    except ValueError as e:
        raise CliError(1, f"bad metrics file: {e}") from None
    return rows


def _eval_utterances(eval_dir) -> list[dict]:
    noisy_dir = os.path.join(eval_dir, "noisy")
    clean_dir = os.path.join(eval_dir, "clean")
    if not os.path.isdir(noisy_dir) or not os.path.isdir(clean_dir):
        raise CliError(1, f"{eval_dir!r} needs noisy/ and clean/ subfolders")
    utts = []
    for name in sorted(os.listdir(noisy_dir)):
        if not name.endswith(".wav"):
            continue
        clean_path = os.path.join(clean_dir, name)
        if not os.path.exists(clean_path):
            raise CliError(1, f"no clean counterpart for {name}")
        utts.append({
            "id": os.path.splitext(name)[0],
            "noisy_wav_b64": base64.b64encode(
                _read_file(os.path.join(noisy_dir, name), "audio")).decode(),
            "clean_wav_b64": base64.b64encode(
                _read_file(clean_path, "audio")).decode(),
        })
    if not utts:
        raise CliError(1, f"no WAV pairs under {eval_dir!r}")
    return utts


def cmd_search(args) -> int:
    body = {"structure": args.structure, "target": args.target,
            "utterances": _eval_utterances(args.eval_dir)}
    if args.metrics:
        body["metrics"] = _load_metrics_rows(args.metrics)
    with _client(args.server) as client:
        mid = _upload_model(client, args.model)
        resp = _check(client.post(f"/models/{mid}/search", json=body))
        payload = resp.json()
        _write(args.report, json.dumps(payload["report"], indent=2).encode(), "report")
        if args.save_winner:
            data = _check(client.get(f"/models/{payload['winner_model_id']}/file")).content
            _write(args.save_winner, data, "model")
    winner = payload["report"]["winner"]
    print(f"evaluated {payload['report']['plans_evaluated']} plans "
          f"(Q basis: {payload['report']['q_basis']})")
    print(f"winner: {winner['plan']['per_layer']} -> Q {winner['q']:.3f}, "
          f"sparsity {winner['overall_sparsity']:.4f}, speedup {winner['speedup']:.2f}x")
    print(f"wrote {args.report}")
    return 0


def cmd_report(args) -> int:
    body = {}
    if args.hw:
        try:
            body["hw"] = json.loads(_read_file(args.hw, "hardware profile"))
        except ValueError as e:
            raise CliError(1, f"bad hardware profile JSON: {e}") from None
    if args.anchors:
        body["anchors_text"] = _read_file(args.anchors, "anchor table").decode()
    with _client(args.server) as client:
        mid = _upload_model(client, args.model)
        resp = _check(client.post(f"/models/{mid}/report", json=body))
        payload = resp.json()
    text = json.dumps(payload, indent=2)
    if args.output:
        _write(args.output, text.encode(), "report")
        print(f"wrote {args.output}")
    else:
        print(text)
    return 0 if payload["constraints"]["overall"] or not args.strict else 3


def cmd_sparsity_map(args) -> int:
    with _client(args.server) as client:
        mid = _upload_model(client, args.model)
        resp = _check(client.get(f"/models/{mid}/layers/{args.layer}/sparsity-map"))
        _write(args.output, resp.content, "image")
    print(f"wrote {args.output}")
    return 0


def cmd_inspect(args) -> int:
    with _client(args.server) as client:
        mid = _upload_model(client, args.model)
        payload = _check(client.get(f"/models/{mid}")).json()
    if args.json:
        print(json.dumps(payload, indent=2))
        return 0
    print(f"model {payload['model_id']}: {payload['params']} params, "
          f"{payload['structure']} structure, "
          f"sparsity {payload['overall_sparsity']:.4f}")
    print(f"  dsp: {payload['sample_rate']} Hz, frame {payload['frame_size']}, "
          f"hop {payload['hop_size']}, {payload['mel_bins']} mel bands")
    print(f"  footprint: {payload['footprint']['total_bytes']} bytes total "
          f"({payload['footprint']['value_bytes']} values)")
    print(f"  ops/frame: {payload['ops_per_frame']}, speedup {payload['speedup']:.2f}x")
    print(f"  weight hash: {payload['weight_hash']}")
    for layer in payload["layers"]:
        print(f"  {layer['name']}: {layer['kind']} {layer['out_size']}x{layer['in_size']} "
              f"{layer['weight_bits']}-bit {layer['encoding']}, "
              f"sparsity {layer['sparsity']:.4f}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="melmask",
                     description="Speech enhancement and model compression toolkit")
    parser.add_argument("--server", default=None,
                        help="URL of a running service (default: run in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enhance", help="denoise a WAV file")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=cmd_enhance)

    p = sub.add_parser("prune", help="magnitude-prune a model")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("--structure", required=True, choices=["weight", "block", "unit"])
    p.add_argument("--target", type=float, default=None,
                   help="overall sparsity target in 0.1 steps")
    p.add_argument("--plan", default=None,
                   help="explicit per-layer fractions, e.g. lstm1=0.5,lstm2=0.6")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--report", default=None, help="also write the JSON report here")
    p.set_defaults(fn=cmd_prune)

    p = sub.add_parser("search", help="search per-layer sparsity combinations")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("--structure", required=True, choices=["weight", "block", "unit"])
    p.add_argument("--target", type=float, required=True)
    p.add_argument("--eval-dir", required=True,
                   help="directory with noisy/ and clean/ WAV pairs")
    p.add_argument("--metrics", default=None,
                   help="CSV sidecar: utterance, stoi, pesq")
    p.add_argument("--report", required=True, help="output JSON report path")
    p.add_argument("--save-winner", default=None, help="write the winning container here")
    p.set_defaults(fn=cmd_search)

    p = sub.add_parser("report", help="footprint/latency constraint report")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("--hw", default=None, help="hardware profile JSON")
    p.add_argument("--anchors", default=None, help="speedup anchor table file")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--strict", action="store_true",
                   help="exit 3 when the model misses the budget")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("sparsity-map", help="render a layer's keep mask as PGM")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("--layer", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=cmd_sparsity_map)

    p = sub.add_parser("inspect", help="print model facts and the weight hash")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_inspect)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8760)
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
