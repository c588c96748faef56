"""Thin command-line client for the wgbench service.

Without --url the service runs in-process; with --url the same requests go
to a remote instance started via `wgbench serve`.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Optional

import click
import httpx

USAGE_EXIT = 2
EMPTY_EXIT = 3


def _client(url: Optional[str]) -> httpx.Client:
    if url:
        return httpx.Client(base_url=url, timeout=300.0)
    # In-process mode: drive the ASGI app directly through the test client,
    # which is a synchronous httpx.Client over the app.
    from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _call(client: httpx.Client, method: str, path: str, **kwargs) -> dict:
    resp = client.request(method, path, **kwargs)
    if resp.status_code >= 400:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        click.echo(f"error: {detail}", err=True)
        sys.exit(EMPTY_EXIT if resp.status_code == 409 else USAGE_EXIT)
    return resp.json()


@click.group()
@click.option("--url", default=None, help="Base URL of a running service; default runs in-process.")
@click.pass_context
def main(ctx: click.Context, url: Optional[str]) -> None:
    ctx.obj = url


@main.command()
@click.option("--ipv6-global-id", type=int, default=None)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.pass_obj
def plan(url: Optional[str], ipv6_global_id: Optional[int], out: Path) -> None:
    """Write the default subnet plan (JSON) and firewall rules (text)."""
    with _client(url) as client:
        doc = _call(client, "POST", "/plan", json={"ipv6_global_id": ipv6_global_id})
    out.write_text(json.dumps(doc["plan"], indent=2) + "\n")
    out.with_suffix(".rules").write_text(doc["firewall"])
    if doc.get("ipv6"):
        out.with_suffix(".ipv6.json").write_text(json.dumps(doc["ipv6"], indent=2) + "\n")
    click.echo(f"wrote {out}")


@main.command()
@click.option("--scenario", required=True)
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--count", type=int, default=1000, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.pass_obj
def run(url: Optional[str], scenario: str, seed: int, count: int,
        config_path: Optional[Path], out: Path) -> None:
    """Run one scenario; write sample CSV to OUT and light events alongside."""
    body: dict = {"scenario": scenario, "seed": seed, "count": count}
    if config_path is not None:
        body["config"] = json.loads(config_path.read_text())
    with _client(url) as client:
        doc = _call(client, "POST", "/run", json=body)
    out.write_text(doc["samples_csv"])
    out.with_suffix(".events.csv").write_text(doc["events_csv"])
    click.echo(
        f"{doc['scenario']}: {doc['ok_count']} ok, {doc['failed_count']} failed, "
        f"{doc['handshake_count']} handshakes -> {out}"
    )


@main.command()
@click.option("--in", "in_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--json", "as_json", is_flag=True, help="Emit JSON instead of the table.")
@click.pass_obj
def stats(url: Optional[str], in_path: Path, as_json: bool) -> None:
    """Summarize a sample CSV (failed rows excluded)."""
    with _client(url) as client:
        doc = _call(client, "POST", "/stats", json={"samples_csv": in_path.read_text()})
    if as_json:
        click.echo(json.dumps(doc["summary"]))
    else:
        click.echo(doc["table"], nl=False)


@main.command()
@click.option("--in", "in_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--bins", type=int, default=10, show_default=True)
@click.option("--percentiles", default="0.95,0.97,0.99", show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Write the histogram/CDF CSV here; default prints to stdout.")
@click.pass_obj
def report(url: Optional[str], in_path: Path, bins: int, percentiles: str,
           out: Optional[Path]) -> None:
    """Histogram/CDF CSV plus nearest-rank percentiles for a sample CSV."""
    try:
        qs = [float(tok) for tok in percentiles.split(",") if tok.strip()]
    except ValueError:
        raise click.UsageError("percentiles must be comma-separated numbers")
    body = {"samples_csv": in_path.read_text(), "bins": bins, "percentiles": qs}
    with _client(url) as client:
        doc = _call(client, "POST", "/report", json=body)
    if out is not None:
        out.write_text(doc["histogram_csv"])
    else:
        click.echo(doc["histogram_csv"], nl=False)
    for q, value in doc["percentiles"].items():
        click.echo(f"p{float(q) * 100:g} = {value:.2f} ms")


@main.command()
@click.option("--tolerance", type=float, default=0.02, show_default=True)
@click.pass_obj
def check(url: Optional[str], tolerance: float) -> None:
    """Internal-consistency check of the built-in published summaries."""
    with _client(url) as client:
        doc = _call(client, "GET", "/check", params={"tolerance": tolerance})
    for res in doc["results"]:
        status = "pass" if res["passed"] else "FAIL"
        click.echo(
            f"{status}  {res['label']:18s} implied n={res['implied_n']:5d}  "
            f"ci {res['predicted_ci']:.3f} vs {res['published_ci']:.2f}"
        )
    if not doc["all_passed"]:
        sys.exit(1)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
