import json
from decimal import Decimal
from pathlib import Path

import pytest

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture
def six_car_scenario_path() -> Path:
    return SCENARIOS / "six_car_day.json"


@pytest.fixture
def worked_example_trace_path() -> Path:
    return SCENARIOS / "worked_example_trace.json"


@pytest.fixture
def six_car_scenario(six_car_scenario_path) -> dict:
    return json.loads(six_car_scenario_path.read_text(), parse_float=Decimal)


@pytest.fixture
def worked_example_trace(worked_example_trace_path) -> dict:
    return json.loads(worked_example_trace_path.read_text(), parse_float=Decimal)
