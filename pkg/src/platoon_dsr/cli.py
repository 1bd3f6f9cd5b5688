"""Batch front door: run scenarios, settle earnings, manage the ledger.

The CLI is a thin client of the service API. By default it mounts the
service in-process against the given ledger file (no socket involved);
``--server`` points it at a running instance instead, in which case that
instance's ledger is used.

Exit codes: 0 success; 1 parse/validation or generic errors; 2 infeasible
event or ineligible leader; 3 driver-record account underfunded.
"""

from __future__ import annotations

import json
import sys
from decimal import Decimal
from pathlib import Path

import click

from .report import platoon_tables, records_table, settlement_table

EXIT_PARSE = 1
EXIT_INFEASIBLE = 2
EXIT_UNDERFUNDED = 3

_EXIT_BY_ERROR_TYPE = {
    "InfeasibleEvent": EXIT_INFEASIBLE,
    "IneligibleLeader": EXIT_INFEASIBLE,
    "InsufficientBalance": EXIT_UNDERFUNDED,
}


class ServiceClient:
    """HTTP access to the service, remote or mounted in-process.

    In-process mode drives the ASGI app directly over httpx's ASGI
    transport, one event loop per request; the CLI stays a pure client of
    the same surface a remote instance serves.
    """

    def __init__(self, server: str | None, ledger: str | None):
        self._server = server
        if server is None:
            from .service.app import create_app

            self._app = create_app(ledger)

    def _request(self, method: str, url: str, payload: dict | None = None):
        import httpx

        if self._server is not None:
            with httpx.Client(base_url=self._server, timeout=60.0) as client:
                return client.request(method, url, json=payload)

        import asyncio

        async def go():
            transport = httpx.ASGITransport(app=self._app)
            async with httpx.AsyncClient(transport=transport,
                                         base_url="http://service") as client:
                return await client.request(method, url, json=payload)

        return asyncio.run(go())

    def get(self, url: str):
        return self._request("GET", url)

    def post(self, url: str, payload: dict):
        return self._request("POST", url, payload)


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _fail_response(response):
    body = {}
    try:
        body = response.json()
    except ValueError:
        pass
    if "error" in body:
        error_type = body["error"].get("type", "")
        message = body["error"].get("message", "request failed")
    elif "detail" in body:
        error_type = "RequestValidationError"
        message = json.dumps(body["detail"])
    else:
        error_type = ""
        message = f"request failed with status {response.status_code}"
    _fail(f"{error_type}: {message}" if error_type else message,
          _EXIT_BY_ERROR_TYPE.get(error_type, EXIT_PARSE))


def _load_json_file(path: str, what: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        _fail(f"cannot read {what} file: {exc}", EXIT_PARSE)
    try:
        return json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        _fail(f"{what} file is not valid JSON "
              f"(line {exc.lineno}, column {exc.colno}): {exc.msg}", EXIT_PARSE)


def _apply_overrides(data: dict, delta, eta, decimals):
    if delta is not None:
        data["delta"] = str(delta)
    if eta is not None:
        data["eta"] = str(eta)
    if decimals is not None:
        data["decimals"] = decimals


def _dump_json(data) -> str:
    return json.dumps(data, indent=2, default=str) + "\n"


server_option = click.option(
    "--server", default=None, metavar="URL",
    help="Base URL of a running service; default mounts the service in-process.")
json_option = click.option("--json", "as_json", is_flag=True,
                           help="Print the report as JSON.")


@click.group()
def main():
    """Platoon lifecycle simulation, earnings settlement, and DSR token ledger."""


@main.command()
@click.option("--scenario", "scenario_path", required=True, metavar="PATH",
              help="Scenario JSON file.")
@click.option("--out", "out_path", required=True, metavar="PATH",
              help="Where to write the trace JSON.")
@click.option("--delta", type=Decimal, default=None,
              help="Override the scenario's balancing factor.")
@click.option("--eta", type=Decimal, default=None,
              help="Override the scenario's penalty threshold (miles).")
@click.option("--decimals", type=int, default=None,
              help="Override the scenario's token decimals.")
@json_option
@server_option
def simulate(scenario_path, out_path, delta, eta, decimals, as_json, server):
    """Run a scenario and write its platoon trace."""
    data = _load_json_file(scenario_path, "scenario")
    _apply_overrides(data, delta, eta, decimals)

    client = ServiceClient(server, None)
    response = client.post("/simulate", _jsonable(data))
    if response.status_code >= 400:
        _fail_response(response)
    trace = response.json()["trace"]
    Path(out_path).write_text(_dump_json(trace))
    if as_json:
        click.echo(_dump_json(trace), nl=False)
    else:
        click.echo(platoon_tables(trace))
        click.echo(f"\ntrace written to {out_path}")


@main.command()
@click.option("--trace", "trace_path", required=True, metavar="PATH",
              help="Trace JSON file produced by simulate.")
@click.option("--ledger", "ledger_path", default=None, metavar="PATH",
              help="Ledger file (required unless --server is given).")
@click.option("--date", "earning_date", required=True,
              type=click.DateTime(formats=["%Y-%m-%d"]),
              help="Earning date, YYYY-MM-DD.")
@click.option("--delta", type=Decimal, default=None,
              help="Override the trace's balancing factor.")
@click.option("--eta", type=Decimal, default=None,
              help="Override the trace's penalty threshold (miles).")
@click.option("--decimals", type=int, default=None,
              help="Override the trace's token decimals.")
@click.option("--report", "report_path", default=None, metavar="PATH",
              help="Also write the full run report JSON here.")
@json_option
@server_option
def settle(trace_path, ledger_path, earning_date, delta, eta, decimals,
           report_path, as_json, server):
    """Settle a trace and commit driver credits to the ledger."""
    if server is None and ledger_path is None:
        _fail("--ledger is required unless --server is given", EXIT_PARSE)
    data = _load_json_file(trace_path, "trace")
    _apply_overrides(data, delta, eta, decimals)

    client = ServiceClient(server, ledger_path)
    response = client.post(
        "/settle",
        {"trace": _jsonable(data), "date": earning_date.date().isoformat()},
    )
    if response.status_code >= 400:
        _fail_response(response)
    report = response.json()
    report["trace"] = trace_path
    if report_path is not None:
        Path(report_path).write_text(_dump_json(report))
    if as_json:
        click.echo(_dump_json(report), nl=False)
    else:
        click.echo(settlement_table(report["settlements"]))
        totals = report["totals"]
        block_range = report["ledger"]["block_range"]
        committed = ("no block committed" if block_range is None
                     else f"block {block_range[0]} committed")
        click.echo(f"\ncredited {totals['credited_tokens']} tokens "
                   f"({totals['credited_base_units']} base units) "
                   f"to {totals['drivers']} drivers; {committed}")
        if report["ledger"]["verified"] is not None:
            status = "ok" if report["ledger"]["verified"] else "FAILED"
            click.echo(f"chain verification: {status}")


@main.group()
def ledger():
    """Initialize, fund, verify, and query the token ledger."""


def _ledger_client(server, ledger_path) -> ServiceClient:
    if server is None and ledger_path is None:
        _fail("--ledger is required unless --server is given", EXIT_PARSE)
    return ServiceClient(server, ledger_path)


@ledger.command()
@click.option("--ledger", "ledger_path", default=None, metavar="PATH")
@click.option("--supply", type=Decimal, default=Decimal(10_000_000),
              show_default=True, help="Fixed supply to mint, in whole tokens.")
@click.option("--decimals", type=int, default=2, show_default=True)
@click.option("--date", "day", type=click.DateTime(formats=["%Y-%m-%d"]),
              default="1970-01-01", show_default=True,
              help="Date used for block timestamps.")
@json_option
@server_option
def init(ledger_path, supply, decimals, day, as_json, server):
    """Create the ledger, mint the fixed supply, authorize driver-record."""
    client = _ledger_client(server, ledger_path)
    response = client.post("/ledger/init", {
        "supply_tokens": str(supply),
        "decimals": decimals,
        "date": day.date().isoformat(),
    })
    if response.status_code >= 400:
        _fail_response(response)
    body = response.json()
    if as_json:
        click.echo(_dump_json(body), nl=False)
    else:
        click.echo(f"minted {body['total_supply']} tokens; "
                   f"authority balance {body['authority_balance']}, "
                   f"driver-record allowance {body['driver_record_allowance']}")


@ledger.command()
@click.option("--ledger", "ledger_path", default=None, metavar="PATH")
@click.option("--amount", type=Decimal, required=True,
              help="Whole tokens to move into the driver-record account.")
@click.option("--date", "day", type=click.DateTime(formats=["%Y-%m-%d"]),
              default="1970-01-01", show_default=True)
@json_option
@server_option
def fund(ledger_path, amount, day, as_json, server):
    """Draw on the authority's allowance to fund driver credits."""
    client = _ledger_client(server, ledger_path)
    response = client.post("/ledger/fund", {
        "amount_tokens": str(amount),
        "date": day.date().isoformat(),
    })
    if response.status_code >= 400:
        _fail_response(response)
    body = response.json()
    if as_json:
        click.echo(_dump_json(body), nl=False)
    else:
        click.echo(f"authority balance {body['authority_balance']}, "
                   f"driver-record balance {body['driver_record_balance']}")


@ledger.command()
@click.option("--ledger", "ledger_path", default=None, metavar="PATH")
@json_option
@server_option
def verify(ledger_path, as_json, server):
    """Recompute all hashes and replay all transactions from genesis."""
    client = _ledger_client(server, ledger_path)
    response = client.get("/ledger/verify")
    if response.status_code >= 400:
        _fail_response(response)
    body = response.json()
    if as_json:
        click.echo(_dump_json(body), nl=False)
        sys.exit(0 if body["ok"] else EXIT_PARSE)
    if body["ok"]:
        click.echo(f"ok: {body['blocks']} blocks verified")
    else:
        _fail(f"corruption at block {body['block_index']} "
              f"({body['field']}): {body['detail']}", EXIT_PARSE)


@ledger.command()
@click.option("--ledger", "ledger_path", default=None, metavar="PATH")
@click.argument("account")
@json_option
@server_option
def balance(ledger_path, account, as_json, server):
    """Print an account's balance in whole tokens."""
    client = _ledger_client(server, ledger_path)
    response = client.get(f"/ledger/balance/{account}")
    if response.status_code >= 400:
        _fail_response(response)
    if as_json:
        click.echo(_dump_json(response.json()), nl=False)
    else:
        click.echo(str(response.json()["tokens"]))


@ledger.command()
@click.option("--ledger", "ledger_path", default=None, metavar="PATH")
@click.argument("driver_id")
@json_option
@server_option
def records(ledger_path, driver_id, as_json, server):
    """Print a driver's stored daily records, oldest first."""
    client = _ledger_client(server, ledger_path)
    response = client.get(f"/ledger/records/{driver_id}")
    if response.status_code >= 400:
        _fail_response(response)
    body = response.json()
    if as_json:
        click.echo(_dump_json(body), nl=False)
    elif not body["records"]:
        click.echo(f"no records for {driver_id}")
    else:
        click.echo(records_table(body["records"]))


@main.command()
@click.option("--ledger", "ledger_path", required=True, metavar="PATH")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(ledger_path, host, port):
    """Run the service against one ledger file."""
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(ledger_path), host=host, port=port)


def _jsonable(data):
    """Decimals -> strings so request bodies keep exact values."""
    if isinstance(data, Decimal):
        return str(data)
    if isinstance(data, dict):
        return {key: _jsonable(value) for key, value in data.items()}
    if isinstance(data, list):
        return [_jsonable(item) for item in data]
    return data


if __name__ == "__main__":
    main()
