"""Command-line surface.

Every subcommand maps one-to-one onto library operations and writes a
JSON manifest next to its primary output recording the full argument
set, seeds and library versions, so any run can be reproduced
byte-for-byte.  Exit codes: 0 success, 2 validation/usage error, 1
runtime error.
"""

import argparse
import json
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bench import bench_table1, bench_table2, table1_csv, table2_csv
from .errors import FormatError, InvalidInputError, TwosdrError
from .gammasup import (
    DEFAULT_MIN_SIZE,
    DEFAULT_S,
    GammaSupConfig,
    gamma_sup,
    normalize_scores,
    phase_transition_scan,
)
from .io import (
    load_model,
    read_matrix_csv,
    read_stack,
    save_model,
    write_labels_csv,
    write_matrix_csv,
    write_stack,
)
from .metrics import mse, psnr
from .pipeline import denoise, fit_2sdr, scores
from .rng import GENERATOR
from .synth import HmpcaSynthSpec, PcaSynthSpec, gen_hmpca_data, gen_pca_data
from .tsne import TsneConfig, tsne


def _threads(args):
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("TSDR_THREADS")
    if env:
        try:
            return max(int(env), 1)
        except ValueError:
            raise InvalidInputError(f"TSDR_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def _write_manifest(primary_output, args, extra=None):
    manifest = {
        "command": args.command,
        "arguments": {k: v for k, v in vars(args).items()
                      if k not in ("command", "func") and v is not None},
        "versions": {
            "twosdr": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "rng": GENERATOR,
        "outputs": [str(primary_output)],
    }
    if extra:
        manifest.update(extra)
    # Timestamp lives in its own field, outside anything checksummed.
    manifest["written_at"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    path = Path(str(primary_output) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, default=str) + "\n")


def _emit(payload, out):
    text = json.dumps(payload, indent=2, default=str) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------

def _cmd_synth(args):
    if args.model == "pca":
        spec = PcaSynthSpec(n=args.n, p=args.p or 40, q=args.q or 40,
                            c=args.c if args.c is not None else 4.0,
                            seed=args.seed)
        data = gen_pca_data(spec)
    else:
        spec = HmpcaSynthSpec(
            n=args.n, p=args.p or 50, q=args.q or 50,
            sigma2=args.sigma2 if args.sigma2 is not None else 1.1,
            c=args.c, noise_family=args.noise, seed=args.seed,
        )
        data = gen_hmpca_data(spec)
    write_stack(data.stack, args.out, dtype=args.dtype)
    truth_path = Path(args.out).with_suffix(".truth" + Path(args.out).suffix)
    write_stack(data.truth, truth_path, dtype=args.dtype)
    spec_dict = {k: (list(v) if isinstance(v, tuple) else v)
                 for k, v in spec.__dict__.items()}
    spec_dict["snr"] = spec.snr
    Path(str(args.out) + ".spec.json").write_text(
        json.dumps({"model": args.model, "spec": spec_dict}, indent=2) + "\n"
    )
    _write_manifest(args.out, args,
                    extra={"truth": str(truth_path), "snr": spec.snr})
    return 0


def _cmd_fit(args):
    stack = read_stack(args.input)
    model = fit_2sdr(stack, p_u=args.p_u, q_u=args.q_u,
                     sigma2=args.sigma2, r_max=args.r_max)
    save_model(model, args.out)
    _write_manifest(args.out, args, extra={
        "ranks": list(model.ranks),
        "sigma2": model.mpca.sigma2,
    })
    return 0


def _cmd_select(args):
    stack = read_stack(args.input)
    model = fit_2sdr(stack, p_u=args.p_u, q_u=args.q_u,
                     sigma2=args.sigma2, r_max=args.r_max)
    report = {
        "ranks": list(model.ranks),
        "sure": model.sure_grid.to_dict(),
        "gic": model.gic_curve.to_dict(),
    }
    _emit(report, args.out)
    if args.out:
        _write_manifest(args.out, args)
    return 0


def _cmd_reconstruct(args):
    stack = read_stack(args.input)
    model = load_model(args.model)
    write_stack(denoise(model, stack), args.out, dtype=args.dtype)
    _write_manifest(args.out, args)
    return 0


def _cmd_cluster(args):
    pts = read_matrix_csv(args.input)
    if args.normalize:
        pts = normalize_scores(pts)
    scan = None
    if args.tau is None:
        scan = phase_transition_scan(pts, s=args.s, min_size=args.min_size,
                                     normalize=False, max_iter=args.max_iter)
        tau = scan.recommended_tau
    else:
        tau = args.tau
    result = gamma_sup(pts, GammaSupConfig(tau=tau, s=args.s,
                                           max_iter=args.max_iter))
    write_labels_csv(result.labels, args.out)
    if args.scan_out and scan is not None:
        table = np.column_stack([scan.taus, scan.n_clusters,
                                 scan.n_large_clusters])
        write_matrix_csv(table, args.scan_out,
                         header="tau,n_clusters,n_large_clusters")
    _write_manifest(args.out, args, extra={
        "tau": tau,
        "n_clusters": result.n_clusters,
        "converged": result.converged,
    })
    return 0


def _cmd_embed(args):
    pts = read_matrix_csv(args.input)
    config = TsneConfig(perplexity=args.perplexity, iters=args.iters,
                        seed=args.seed, eta=args.eta)
    Y, trace = tsne(pts, config)
    write_matrix_csv(Y, args.out, header="y1,y2")
    _write_manifest(args.out, args, extra={"final_kl": float(trace[-1])})
    return 0


def _cmd_metrics(args):
    truth = read_stack(args.truth)
    if args.recon:
        recon = read_stack(args.recon)
    else:
        if not (args.model and args.input):
            raise InvalidInputError(
                "metrics needs either --recon, or --model plus --in"
            )
        recon = denoise(load_model(args.model), read_stack(args.input))
    report = {"mse": mse(recon, truth), "n": int(truth.shape[0])}
    try:
        report["psnr"] = psnr(truth, recon, value_range=args.range)
    except TwosdrError:
        report["psnr"] = None  # zero-error reconstruction has no finite PSNR
    _emit(report, args.out)
    if args.out:
        _write_manifest(args.out, args)
    return 0


def _cmd_bench(args):
    threads = _threads(args)
    if args.table == "table1":
        result = bench_table1(args.setting, n=args.n, reps=args.reps,
                              seed=args.seed, c=args.c, sigma2=args.sigma2,
                              noise=args.noise, threads=threads)
        csv_text = table1_csv(result)
    else:
        result = bench_table2(n=args.n, reps=args.reps, seed=args.seed,
                              sigma2=args.sigma2, noise=args.noise,
                              threads=threads)
        csv_text = table2_csv(result)
    if args.out:
        Path(args.out).write_text(csv_text)
        _write_manifest(args.out, args, extra={"summary": result.summary})
    else:
        sys.stdout.write(csv_text)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="twosdr",
        description="Two-stage dimension reduction for noisy image stacks",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="worker processes for replication batches "
                             "(default: TSDR_THREADS or hardware count)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic stack")
    p.add_argument("--model", choices=("pca", "hmpca"), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--c", type=float)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--noise", choices=("gaussian", "t5"), default="gaussian")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dtype", choices=("f32", "f64"), default="f64")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("fit", help="fit the two-stage model to a stack")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--p-u", dest="p_u", type=int)
    p.add_argument("--q-u", dest="q_u", type=int)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--r-max", dest="r_max", type=int)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("select", help="report the rank-selection grids")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.add_argument("--p-u", dest="p_u", type=int)
    p.add_argument("--q-u", dest="q_u", type=int)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--r-max", dest="r_max", type=int)
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("reconstruct", help="denoise a stack with a model")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dtype", choices=("f32", "f64"), default="f64")
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("cluster", help="cluster a score matrix")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scan-out", dest="scan_out")
    p.add_argument("--tau", type=float)
    p.add_argument("--s", type=float, default=DEFAULT_S)
    p.add_argument("--min-size", dest="min_size", type=int,
                   default=DEFAULT_MIN_SIZE)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=500)
    p.add_argument("--no-normalize", dest="normalize", action="store_false")
    p.set_defaults(func=_cmd_cluster, normalize=True)

    p = sub.add_parser("embed", help="2-d embedding of a score matrix")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--eta", type=float, default=200.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("metrics", help="reconstruction error against truth")
    p.add_argument("--truth", required=True)
    p.add_argument("--recon")
    p.add_argument("--model")
    p.add_argument("--in", dest="input")
    p.add_argument("--range", type=float)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("bench", help="replication experiments")
    p.add_argument("table", choices=("table1", "table2"))
    p.add_argument("--setting", choices=("pca", "hmpca"), default="hmpca")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--c", type=float, default=4.0)
    p.add_argument("--sigma2", type=float, default=1.1)
    p.add_argument("--noise", choices=("gaussian", "t5"), default="gaussian")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidInputError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TwosdrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
