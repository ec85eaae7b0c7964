"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 input-format error, 4 numerical
failure.
"""

import argparse
import csv
import io
import json
import sys
import time

import numpy as np

from . import bench, lipk
from .conv import (
    ConvKernel,
    conv_power_iteration,
    exact_conv_spectrum,
    gram_conv,
    gram_conv_subsampled,
    materialize_conv_operator,
)
from .dense import gram_eigen, gram_naive, gram_rescaled, power_iteration, svd_exact
from .errors import FormatError, NumericalError, ShapeError
from .linalg import singular_values
from .network import load_network, network_bound

EXIT_OK, EXIT_USAGE, EXIT_FORMAT, EXIT_NUMERICAL = 0, 2, 3, 4

DENSE_METHODS = {
    "gram": (gram_rescaled, 12),
    "naive": (gram_naive, 5),
    "eigen": (gram_eigen, 12),
    "power": (power_iteration, 100),
    "svd": (svd_exact, None),
}
CONV_METHODS = {"gram": 5, "exact": None, "power": 100}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p, methods, default_method):
    p.add_argument("--method", choices=methods, default=default_method)
    p.add_argument("--iters", type=int, default=None, help="iteration count (method default if omitted)")
    p.add_argument("--seed", type=int, default=0, help="seed for power iteration start vectors")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--trace", action="store_true", help="emit per-iteration values as CSV")


def build_parser():
    parser = _Parser(prog="lipgram", description="Certified spectral-norm bounds.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("matrix", help="dense matrix spectral norm")
    src = m.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="LIPK file holding a c_out x c_in x 1 x 1 matrix")
    src.add_argument("--rows", type=int, help="synthetic Gaussian matrix rows (needs --cols)")
    m.add_argument("--cols", type=int)
    m.add_argument("--complex", action="store_true", help="synthetic matrix with complex entries")
    m.add_argument("--data-seed", type=int, default=None, help="seed for the synthetic matrix (defaults to --seed)")
    _common(m, sorted(DENSE_METHODS), "gram")

    c = sub.add_parser("conv", help="convolution layer spectral norm")
    _kernel_source(c)
    c.add_argument("--n", type=int, required=True, help="spatial input size")
    c.add_argument("--n0", type=int, help="compute the gram bound at this smaller size")
    c.add_argument("--padding", choices=("circular", "zero"), default="circular")
    _common(c, sorted(CONV_METHODS), "gram")

    nw = sub.add_parser("network", help="whole-network Lipschitz bound")
    nw.add_argument("--spec", required=True, help="network JSON description")
    _common(nw, ("gram", "exact", "power"), "gram")

    b = sub.add_parser("bench", help="run a benchmark sweep")
    b.add_argument("--config", required=True, help="bench config JSON")
    b.add_argument("--out", help="output path (overrides the config)")
    b.add_argument("--format", choices=("csv", "json"), help="output format (overrides the config)")

    cmp_ = sub.add_parser("compare", help="circular bound vs zero-padding estimate")
    _kernel_source(cmp_)
    cmp_.add_argument("--n", type=int, required=True)
    cmp_.add_argument("--iters", type=int, default=12, help="gram iterations")
    cmp_.add_argument("--power-iters", type=int, default=2000, help="zero-padding power iterations")
    cmp_.add_argument("--seed", type=int, default=0)
    cmp_.add_argument("--out")
    cmp_.add_argument("--format", choices=("csv", "json"), default="json")
    return parser


def _kernel_source(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--kernel", help="LIPK kernel file")
    src.add_argument("--random", type=int, nargs=3, metavar=("C_OUT", "C_IN", "K"),
                     help="synthetic Gaussian kernel")
    p.add_argument("--data-seed", type=int, default=None, help="seed for the synthetic kernel (defaults to --seed)")


def _data_seed(args):
    return args.seed if args.data_seed is None else args.data_seed


def _load_kernel(args):
    if args.kernel:
        return lipk.read(args.kernel)
    c_out, c_in, k = args.random
    if min(c_out, c_in, k) < 1:
        raise UsageError("--random dimensions must be positive")
    return np.random.default_rng(_data_seed(args)).standard_normal((c_out, c_in, k, k))


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _render(doc, fmt):
    if fmt == "json":
        return json.dumps(doc, indent=1) + "\n"
    buf = io.StringIO()
    flat = {k: v for k, v in doc.items() if not isinstance(v, (list, dict))}
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(flat)
    writer.writerow([repr(v) if isinstance(v, float) else v for v in flat.values()])
    return buf.getvalue()


def _trace_csv(trace, reference):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["iter", "value", "abs_error"])
    for i, value in enumerate(trace, 1):
        writer.writerow([i, repr(value), repr(abs(value - reference))])
    return buf.getvalue()


def _finish(args, doc, summary, trace=None, reference=None):
    if args.trace:
        print(summary, file=sys.stderr)
        _emit(_trace_csv(trace, reference), args.out)
    elif args.out:
        print(summary)
        _emit(_render(doc, args.format), args.out)
    else:
        print(summary)


def cmd_matrix(args):
    if args.input:
        g = lipk.read_matrix(args.input)
    else:
        if args.cols is None:
            raise UsageError("--rows needs --cols")
        if args.rows < 1 or args.cols < 1:
            raise UsageError("--rows and --cols must be positive")
        rng = np.random.default_rng(_data_seed(args))
        g = rng.standard_normal((args.rows, args.cols))
        if args.complex:
            g = g + 1j * rng.standard_normal((args.rows, args.cols))
    fn, default_iters = DENSE_METHODS[args.method]
    iters = args.iters if args.iters is not None else default_iters
    if args.method == "svd":
        report = fn(g)
    elif args.method == "power":
        report = fn(g, iters, args.seed)
    else:
        report = fn(g, iters)
    doc = report.to_dict()
    summary = (f"{report.method}: value={report.value!r} iterations={report.iterations} "
               f"elapsed={report.elapsed_seconds:.6f}s")
    reference = svd_exact(g).value if args.trace else None
    _finish(args, doc, summary, report.trace, reference)
    return EXIT_OK


def cmd_conv(args):
    filt = _load_kernel(args)
    padding = args.padding
    if args.method != "power" and padding != "circular":
        raise UsageError(f"--method {args.method} bounds circular padding only; use --method power for zero padding")
    kernel = ConvKernel(filt, args.n, padding)
    iters = args.iters if args.iters is not None else CONV_METHODS[args.method]
    if args.n0 is not None:
        if args.method != "gram":
            raise UsageError("--n0 applies to --method gram only")
        report = gram_conv_subsampled(kernel, args.n0, iters)
    elif args.method == "gram":
        report = gram_conv(kernel, iters)
    elif args.method == "exact":
        report = exact_conv_spectrum(kernel)
    else:
        report = conv_power_iteration(kernel, iters, args.seed)
    summary = (f"{report.method}: value={report.value!r} argmax_frequency={report.argmax_block} "
               f"elapsed={report.elapsed_seconds:.6f}s")
    reference = None
    if args.trace:
        if padding == "circular":
            reference = exact_conv_spectrum(kernel.with_size(args.n)).value
        else:
            reference = float(singular_values(materialize_conv_operator(kernel))[0])
    _finish(args, report.to_dict(), summary, report.trace, reference)
    return EXIT_OK


def cmd_network(args):
    net = load_network(args.spec)
    iters = args.iters if args.iters is not None else (100 if args.method == "power" else 7)
    report = network_bound(net, args.method, iters, args.seed)
    lines = [f"network {net.name!r} method={args.method} iters={iters}",
             f"{'idx':>3}  {'kind':<18}{'shape':<14}{'bound':>22}{'time [s]':>12}"]
    for row in report.per_layer:
        lines.append(f"{row['index']:>3}  {row['kind']:<18}{row['shape']:<14}"
                     f"{row['bound']:>22.15g}{row['elapsed_seconds']:>12.6f}")
    lines.append(f"total {report.total!r}")
    summary = "\n".join(lines)
    if args.trace:
        raise UsageError("--trace is not available for network")
    if args.out and args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["index", "kind", "label", "shape", "bound", "elapsed_seconds"])
        for row in report.per_layer:
            writer.writerow([row["index"], row["kind"], row["label"], row["shape"],
                             repr(row["bound"]), repr(row["elapsed_seconds"])])
        print(summary)
        _emit(buf.getvalue(), args.out)
        return EXIT_OK
    _finish(args, report.to_dict(), summary)
    return EXIT_OK


def cmd_bench(args):
    config = bench.BenchConfig.load(args.config)
    fmt = args.format or config.format
    out = args.out or config.output
    rows = bench.run_bench(config)
    _emit(bench.to_csv(rows) if fmt == "csv" else bench.to_json(rows) + "\n", out)
    return EXIT_OK


def compare(filt, n, n_iter=12, power_iters=2000, seed=0):
    """Circular Gram bound next to the zero-padding power estimate.

    Within the materialization limit both operators are also built densely
    and their exact norms reported.
    """
    circ = ConvKernel(filt, n, "circular")
    start = time.perf_counter()
    circular = gram_conv(circ, n_iter).value
    doc = {"n": n, "circular_bound": circular, "elapsed_circular": time.perf_counter() - start}
    zero = ConvKernel(filt, n, "zero")
    try:
        w_circ = materialize_conv_operator(circ)
        w_zero = materialize_conv_operator(zero)
    except ShapeError as exc:
        doc["warning"] = f"{exc}; zero-padding estimate skipped"
        return doc
    start = time.perf_counter()
    estimate = conv_power_iteration(zero, power_iters, seed).value
    doc["elapsed_zero"] = time.perf_counter() - start
    doc["zero_estimate"] = estimate
    doc["gap"] = circular - estimate
    doc["circular_exact"] = float(singular_values(w_circ)[0])
    doc["zero_exact"] = float(singular_values(w_zero)[0])
    doc["exact_gap"] = doc["circular_exact"] - doc["zero_exact"]
    return doc


def cmd_compare(args):
    doc = compare(_load_kernel(args), args.n, args.iters, args.power_iters, args.seed)
    if "warning" in doc:
        print(f"warning: {doc['warning']}", file=sys.stderr)
    for key, value in doc.items():
        if key != "warning":
            print(f"{key}: {value!r}")
    if args.out:
        _emit(_render(doc, args.format), args.out)
    return EXIT_OK


COMMANDS = {
    "matrix": cmd_matrix,
    "conv": cmd_conv,
    "network": cmd_network,
    "bench": cmd_bench,
    "compare": cmd_compare,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        # --help
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        # shape and parameter problems, e.g. k > n or n0 < k
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
