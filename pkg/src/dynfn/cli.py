"""Command-line interface: server, client pipeline, and benchmarks."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from . import bench as bench_mod
from . import errors
from .client import ClientSession
from .corpus import DEFAULT_MANIFEST, load_manifest
from .elfobj import extract_function, parse_object, to_hexstring
from .enclave import (
    DEFAULT_ARENA_CAPACITY,
    DEFAULT_SCRATCH_CAPACITY,
    EnclaveConfig,
    default_runtime_table,
)
from .pipeline import PipelineError, provision_function
from .server import DynfnServer

EXIT_OK = 0
EXIT_GENERIC = 1
EXIT_BAD_SIGNATURE = 2
EXIT_NONCE_MISMATCH = 3
EXIT_MEASUREMENT_MISMATCH = 4
EXIT_TRANSPORT = 5
EXIT_REMOTE = 6
EXIT_PIPELINE = 7

_SIZE_SUFFIX = {"": 1, "K": 1024, "M": 1024**2, "G": 1024**3}


def parse_size(text: str) -> int:
    text = text.strip().upper().removesuffix("IB").removesuffix("B")
    suffix = text[-1] if text and text[-1] in _SIZE_SUFFIX else ""
    return int(text.removesuffix(suffix)) * _SIZE_SUFFIX[suffix]


def parse_hostport(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return host or "127.0.0.1", int(port)


def _read_hex_opt(value: str | None) -> bytes | None:
    """Hex string, or @path to a file holding one."""
    if value is None:
        return None
    if value.startswith("@"):
        value = Path(value[1:]).read_text().strip()
    return bytes.fromhex(value)


def _exit_for(exc: Exception) -> int:
    if isinstance(exc, errors.BadSignature):
        return EXIT_BAD_SIGNATURE
    if isinstance(exc, errors.NonceMismatch):
        return EXIT_NONCE_MISMATCH
    if isinstance(exc, errors.MeasurementMismatch):
        return EXIT_MEASUREMENT_MISMATCH
    if isinstance(exc, errors.TransportError):
        return EXIT_TRANSPORT
    if isinstance(exc, errors.RemoteError):
        return EXIT_REMOTE
    if isinstance(exc, PipelineError):
        return EXIT_PIPELINE
    return EXIT_GENERIC


def parse_cli_arg(text: str):
    """int if decimal, bytes if ``hex:``-prefixed, else string."""
    if text.startswith("hex:"):
        return bytes.fromhex(text[4:])
    try:
        return int(text, 10)
    except ValueError:
        pass
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    return text


connection_options = [
    click.option("--server", "server_addr", default="127.0.0.1:7734",
                 show_default=True, help="server address host:port"),
    click.option("--pinned-key", help="enclave verification key (hex or @file)"),
    click.option("--expected-measurement", help="expected measurement (hex or @file)"),
    click.option("--announce", type=click.Path(exists=True),
                 help="JSON file written by `serve --announce` "
                      "(provides address, key, and measurement)"),
]


def with_connection_options(fn):
    for option in reversed(connection_options):
        fn = option(fn)
    return fn


def _connect(server_addr, pinned_key, expected_measurement, announce) -> ClientSession:
    if announce:
        info = json.loads(Path(announce).read_text())
        server_addr = info["address"]
        pinned_key = pinned_key or info["verify_key"]
        expected_measurement = expected_measurement or info["measurement"]
    key = _read_hex_opt(pinned_key)
    measurement = _read_hex_opt(expected_measurement)
    if key is None or measurement is None:
        raise click.UsageError(
            "--pinned-key and --expected-measurement (or --announce) are required"
        )
    session = ClientSession(parse_hostport(server_addr))
    try:
        session.attest(key, measurement)
    except Exception:
        session.close()
        raise
    return session


@click.group()
def main():
    """Attested dynamic loading of native functions."""


# -- server ---------------------------------------------------------------

@main.command()
@click.option("--bind", default="127.0.0.1:7734", show_default=True)
@click.option("--arena-capacity", default=str(DEFAULT_ARENA_CAPACITY),
              show_default=True, help="executable arena size (supports K/M/G)")
@click.option("--scratch-capacity", default=str(DEFAULT_SCRATCH_CAPACITY),
              show_default=True)
@click.option("--signing-key", "signing_key_path", type=click.Path(),
              help="file with a 32-byte hex signing key; generated if missing")
@click.option("--runtime-table", default="all", show_default=True,
              help="comma-separated subset of trusted helpers, or 'all'/'none'")
@click.option("--announce", "announce_path", type=click.Path(),
              help="write address, verify key, and measurement to this JSON file")
def serve(bind, arena_capacity, scratch_capacity, signing_key_path,
          runtime_table, announce_path):
    """Run the enclave server until interrupted."""
    table = default_runtime_table()
    if runtime_table == "none":
        table = ()
    elif runtime_table != "all":
        wanted = {name.strip() for name in runtime_table.split(",")}
        table = tuple(e for e in table if e.name in wanted)

    signing_key = None
    if signing_key_path:
        path = Path(signing_key_path)
        if path.exists():
            signing_key = Ed25519PrivateKey.from_private_bytes(
                bytes.fromhex(path.read_text().strip())
            )
        else:
            signing_key = Ed25519PrivateKey.generate()
            path.write_text(signing_key.private_bytes_raw().hex())

    config = EnclaveConfig(
        arena_capacity=parse_size(arena_capacity),
        scratch_capacity=parse_size(scratch_capacity),
        runtime_table=table,
    )
    try:
        server = DynfnServer(parse_hostport(bind), config, signing_key)
    except errors.BindFailure as exc:
        raise click.ClickException(str(exc))

    host, port = server.address
    info = {
        "address": f"{host}:{port}",
        "verify_key": server.verify_key_bytes.hex(),
        "measurement": server.measurement.hex(),
    }
    if announce_path:
        Path(announce_path).write_text(json.dumps(info, indent=2) + "\n")
    click.echo(f"listening on {info['address']}")
    click.echo(f"verify key    {info['verify_key']}")
    click.echo(f"measurement   {info['measurement']}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()


# -- client commands ------------------------------------------------------

@main.command()
@with_connection_options
def attest(server_addr, pinned_key, expected_measurement, announce):
    """Verify the enclave identity and print the cached address map."""
    try:
        with _connect(server_addr, pinned_key, expected_measurement, announce) as session:
            click.echo("attestation OK")
            for entry in session.address_map:
                click.echo(f"  {entry.name:20s} {entry.return_type:14s} {entry.address:#x}")
    except click.ClickException:
        raise
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_exit_for(exc))


@main.command()
@click.argument("source", type=click.Path(exists=True))
@click.argument("fn_name")
@click.argument("descriptor")
@click.option("--cc", default="cc", show_default=True, help="C toolchain command")
@with_connection_options
def load(source, fn_name, descriptor, cc, server_addr, pinned_key,
         expected_measurement, announce):
    """Compile SOURCE, rewrite externals, extract FN_NAME, and load it."""
    try:
        with _connect(server_addr, pinned_key, expected_measurement, announce) as session:
            fn_id, hexstring = provision_function(
                session, source, fn_name, descriptor, cc=cc
            )
            click.echo(f"id {fn_id}")
            click.echo(hexstring)
    except click.ClickException:
        raise
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_exit_for(exc))


@main.command("exec")
@click.argument("fn_id", type=int)
@click.argument("args", nargs=-1)
@with_connection_options
def exec_cmd(fn_id, args, server_addr, pinned_key, expected_measurement, announce):
    """Execute a loaded function: ints decimal, strings quoted, buffers hex:..."""
    try:
        with _connect(server_addr, pinned_key, expected_measurement, announce) as session:
            ret, wall_ns = session.execute(fn_id, [parse_cli_arg(a) for a in args])
            click.echo(f"return {ret}" if ret is not None else "return (void)")
            click.echo(f"wall_time_ns {wall_ns}")
    except click.ClickException:
        raise
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_exit_for(exc))


@main.command()
@click.argument("fn_id", type=int)
@with_connection_options
def unload(fn_id, server_addr, pinned_key, expected_measurement, announce):
    """Unload a function and reclaim trailing arena space."""
    try:
        with _connect(server_addr, pinned_key, expected_measurement, announce) as session:
            session.unload(fn_id)
            click.echo(f"unloaded {fn_id}")
    except click.ClickException:
        raise
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_exit_for(exc))


@main.command()
@with_connection_options
def clear(server_addr, pinned_key, expected_measurement, announce):
    """Unload all user functions."""
    try:
        with _connect(server_addr, pinned_key, expected_measurement, announce) as session:
            click.echo(session.clear())
    except click.ClickException:
        raise
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_exit_for(exc))


@main.command("list")
@with_connection_options
def list_cmd(server_addr, pinned_key, expected_measurement, announce):
    """List callable names, return types, and addresses."""
    try:
        with _connect(server_addr, pinned_key, expected_measurement, announce) as session:
            for entry in session.list_functions():
                click.echo(f"{entry.name:20s} {entry.return_type:14s} {entry.address:#x}")
    except click.ClickException:
        raise
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_exit_for(exc))


# -- utilities ------------------------------------------------------------

@main.command()
@click.argument("object_file", type=click.Path(exists=True))
@click.argument("symbol")
def extract(object_file, symbol):
    """Print the hexstring of a function inside an object file."""
    try:
        image = parse_object(Path(object_file).read_bytes())
        extracted = extract_function(image, symbol)
        click.echo(to_hexstring(extracted.bytes))
        if extracted.unresolved:
            click.echo(
                f"warning: unresolved externals: {', '.join(extracted.unresolved)}",
                err=True,
            )
    except errors.DynfnError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_GENERIC)


@main.command()
@click.argument("source", type=click.Path(exists=True))
@click.option("--map", "map_path", type=click.Path(exists=True), required=True,
              help="address map JSON (the ADDR_MAP wire format)")
def rewrite(source, map_path):
    """Print SOURCE with mapped external calls rewritten to address casts."""
    from .addrmap import parse_map_json
    from .rewrite import rewrite_source

    try:
        address_map = parse_map_json(Path(map_path).read_bytes())
        click.echo(rewrite_source(Path(source).read_text(), address_map), nl=False)
    except errors.DynfnError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_GENERIC)


@main.command("runtime-map")
def runtime_map():
    """Print this process's trusted-helper address map as JSON."""
    from .addrmap import AddressMap, AddressMapEntry, render_map_json

    table = AddressMap(
        [AddressMapEntry(e.name, e.return_type, e.address)
         for e in default_runtime_table()]
    )
    click.echo(render_map_json(table).decode())


# -- benchmarks -----------------------------------------------------------

@main.command("bench")
@click.option("--workload", type=click.Choice(["fib", "sum_array"]), default="fib",
              show_default=True)
@click.option("--sizes", default=",".join(map(str, bench_mod.DEFAULT_SUM_SIZES_MIB)),
              show_default=True, help="sum_array sizes in MiB")
@click.option("--ns", default=",".join(map(str, bench_mod.DEFAULT_FIB_NS)),
              show_default=True, help="fibonacci n values")
@click.option("--runs", default=bench_mod.DEFAULT_RUNS, show_default=True)
@click.option("--modes", default="direct,channel", show_default=True)
@click.option("--out", "out_path", type=click.Path(), help="CSV output file")
@click.option("--plot", "plot_path", type=click.Path(),
              help="also render a latency figure to this file")
@click.option("--corpus", "corpus_path", type=click.Path(),
              default=str(DEFAULT_MANIFEST), show_default=True)
@click.option("--cc", default="cc", show_default=True)
@click.option("--allow-large-n", is_flag=True,
              help=f"permit fibonacci n > {bench_mod.FIB_DESK_SCALE_CAP}")
@click.option("--server", "server_addr", default=None,
              help="host:port of a running server; an in-process one is "
                   "started when omitted")
@click.option("--pinned-key", help="enclave verification key (hex or @file)")
@click.option("--expected-measurement", help="expected measurement (hex or @file)")
@click.option("--announce", type=click.Path(exists=True))
def bench_cmd(workload, sizes, ns, runs, modes, out_path, plot_path, corpus_path,
              cc, allow_large_n, server_addr, pinned_key, expected_measurement,
              announce):
    """Latency sweep; medians over repeated runs, CSV report."""
    mode_list = [m.strip() for m in modes.split(",") if m.strip()]
    corpus = load_manifest(corpus_path)

    embedded = None
    if any(m != bench_mod.MODE_DIRECT for m in mode_list):
        if server_addr is None and announce is None:
            embedded = DynfnServer(("127.0.0.1", 0))
            embedded.start_background()
            address = embedded.address
            key, measurement = embedded.verify_key_bytes, embedded.measurement
        else:
            if announce:
                info = json.loads(Path(announce).read_text())
                server_addr = server_addr or info["address"]
                pinned_key = pinned_key or info["verify_key"]
                expected_measurement = expected_measurement or info["measurement"]
            address = parse_hostport(server_addr)
            key = _read_hex_opt(pinned_key)
            measurement = _read_hex_opt(expected_measurement)

        def connect():
            session = ClientSession(address)
            session.attest(key, measurement)
            return session
    else:
        connect = None

    harness = bench_mod.Harness(corpus, connect=connect, cc=cc)
    try:
        if workload == "fib":
            params = [int(x) for x in ns.split(",")]
            cap = bench_mod.FIB_DESK_SCALE_CAP
            if not allow_large_n and any(p > cap for p in params):
                raise click.UsageError(
                    f"n > {cap} is slow at desk scale; pass --allow-large-n"
                )
            points = harness.bench_fibonacci(params, runs=runs, modes=mode_list)
        else:
            params = [int(x) for x in sizes.split(",")]
            points = harness.bench_sum_array(params, runs=runs, modes=mode_list)
    finally:
        harness.close()
        if embedded is not None:
            embedded.shutdown()

    report = bench_mod.summarize(points)
    if out_path:
        Path(out_path).write_text(report)
        click.echo(f"wrote {out_path}")
    else:
        click.echo(report, nl=False)
    for p in points:
        if p.error:
            click.echo(f"failed: {p.workload}({p.parameter}) {p.mode}: {p.error}",
                       err=True)
    if plot_path:
        from .plot import render_figure

        render_figure(points, plot_path)
        click.echo(f"wrote {plot_path}")


if __name__ == "__main__":
    main()
