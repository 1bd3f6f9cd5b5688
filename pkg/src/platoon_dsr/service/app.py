"""FastAPI service wrapping the simulator, settlement engine, and ledger.

The app is bound to one ledger file at creation time; simulation and
settlement are stateless per request. The CLI mounts this app in-process,
so every command-line run exercises the same surface a remote client sees.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..domain import TokenAmount
from ..errors import (
    InfeasibleEvent,
    IneligibleLeader,
    LedgerError,
    PlatoonDSRError,
    ScenarioError,
    TraceError,
    UnknownDriver,
    ValidationFailed,
)
from ..ledger import AUTHORITY, DRIVER_RECORD, Ledger, timestamp_for_date, verify_file
from ..pipeline import build_run_report, settle_trace_to_ledger
from ..scenario import scenario_from_dict
from ..simulation import run
from ..trace import PlatoonTrace
from .models import (
    BalanceResponse,
    FundRequest,
    FundResponse,
    LedgerInitRequest,
    LedgerInitResponse,
    RecordsResponse,
    RunReportModel,
    ScenarioModel,
    SettleRequest,
    SimulateResponse,
    TraceModel,
    VerifyResponse,
)

_STATUS_BY_ERROR = (
    (ScenarioError, 422),
    (TraceError, 422),
    (UnknownDriver, 404),
    (InfeasibleEvent, 409),
    (IneligibleLeader, 409),
    (LedgerError, 409),
)


def _status_for(exc: PlatoonDSRError) -> int:
    for error_type, status in _STATUS_BY_ERROR:
        if isinstance(exc, error_type):
            return status
    return 422


def create_app(ledger_path: str | Path | None = None) -> FastAPI:
    app = FastAPI(
        title="platoon-dsr",
        version=__version__,
        description="Platoon lifecycle simulation, earnings settlement, "
                    "and DSR token ledger",
    )
    app.state.ledger_path = Path(ledger_path) if ledger_path is not None else None
    app.state.ledger = None

    @app.exception_handler(PlatoonDSRError)
    async def _domain_error(request: Request, exc: PlatoonDSRError):
        # a rejected block reports the specific transaction error
        named = exc.cause if isinstance(exc, ValidationFailed) and exc.cause else exc
        return JSONResponse(
            status_code=_status_for(exc),
            content={"error": {"type": type(named).__name__, "message": str(exc)}},
        )

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return JSONResponse(
            status_code=422,
            content={"error": {"type": "ValueError", "message": str(exc)}},
        )

    def _ledger_path() -> Path:
        if app.state.ledger_path is None:
            raise LedgerError("no ledger configured for this service")
        return app.state.ledger_path

    def _ledger() -> Ledger:
        # one instance per app: block commits serialize behind its lock
        if app.state.ledger is None:
            app.state.ledger = Ledger.open(_ledger_path())
        return app.state.ledger

    @app.get("/")
    def info():
        path = app.state.ledger_path
        return {"service": "platoon-dsr", "version": __version__,
                "ledger": None if path is None else str(path)}

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(scenario: ScenarioModel):
        spec = scenario_from_dict(scenario.model_dump(exclude_none=True))
        trace = run(spec)
        return SimulateResponse(trace=TraceModel.model_validate(trace.to_dict()))

    @app.post("/settle", response_model=RunReportModel)
    def settle(request: SettleRequest):
        trace = PlatoonTrace.from_dict(request.trace.model_dump())
        ledger = _ledger()
        settlements, block = settle_trace_to_ledger(trace, ledger, request.date)
        verified = ledger.verify() is None if block is not None else None
        report = build_run_report(
            settlements,
            earning_date=request.date,
            decimals=ledger.decimals,
            block=block,
            verified=verified,
            ledger_path=str(ledger.path),
        )
        return RunReportModel.model_validate(report)

    @app.post("/ledger/init", response_model=LedgerInitResponse, status_code=201)
    def ledger_init(request: LedgerInitRequest):
        supply = TokenAmount.from_tokens(request.supply_tokens, request.decimals)
        timestamp = timestamp_for_date(request.date)
        ledger = Ledger.create(_ledger_path(), request.decimals, timestamp)
        app.state.ledger = ledger
        ledger.append_block(
            [ledger.mint(AUTHORITY, supply),
             ledger.approve(AUTHORITY, DRIVER_RECORD, supply)],
            timestamp,
        )
        return LedgerInitResponse(
            height=ledger.height,
            total_supply=ledger.total_supply().to_decimal(),
            authority_balance=ledger.balance_of(AUTHORITY).to_decimal(),
            driver_record_allowance=ledger.allowance(AUTHORITY, DRIVER_RECORD).to_decimal(),
        )

    @app.post("/ledger/fund", response_model=FundResponse)
    def ledger_fund(request: FundRequest):
        ledger = _ledger()
        amount = TokenAmount.from_tokens(request.amount_tokens, ledger.decimals)
        ledger.append_block(
            [ledger.transfer_from(DRIVER_RECORD, AUTHORITY, DRIVER_RECORD, amount)],
            timestamp_for_date(request.date),
        )
        return FundResponse(
            height=ledger.height,
            authority_balance=ledger.balance_of(AUTHORITY).to_decimal(),
            driver_record_balance=ledger.balance_of(DRIVER_RECORD).to_decimal(),
        )

    @app.get("/ledger/verify", response_model=VerifyResponse)
    def ledger_verify():
        report = verify_file(_ledger_path())
        if report is None:
            return VerifyResponse(ok=True, blocks=_ledger().height)
        return VerifyResponse(ok=False, block_index=report.block_index,
                              field=report.field, detail=report.detail)

    @app.get("/ledger/balance/{account}", response_model=BalanceResponse)
    def ledger_balance(account: str):
        ledger = _ledger()
        amount = ledger.balance_of(account)
        return BalanceResponse(account=account, base_units=amount.base_units,
                               decimals=amount.decimals,
                               tokens=amount.to_decimal())

    @app.get("/ledger/records/{driver_id}", response_model=RecordsResponse)
    def ledger_records(driver_id: str):
        ledger = _ledger()
        return RecordsResponse(
            driver_id=driver_id,
            records=[record.to_dict() for record in ledger.records_for(driver_id)],
        )

    @app.get("/ledger/blocks")
    def ledger_blocks():
        return {"blocks": _ledger().export()}

    return app
