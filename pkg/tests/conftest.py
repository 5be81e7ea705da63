import json
from pathlib import Path

import pytest

from factgenius.gateway import ChatGateway, LlmConfig
from factgenius.kg import load_kg
from factgenius.mockllm import MockScript, as_transport

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def mini_kg():
    return load_kg(FIXTURES / "mini_kg.jsonl")


@pytest.fixture(scope="session")
def stage2_kg():
    return load_kg(FIXTURES / "stage2_kg.jsonl")


@pytest.fixture(scope="session")
def eval_kg():
    return load_kg(FIXTURES / "eval_kg.jsonl")


@pytest.fixture(scope="session")
def gold_table() -> dict:
    return json.loads((FIXTURES / "gold_table.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def gold_table_mini() -> dict:
    return json.loads((FIXTURES / "gold_table_mini.json").read_text(encoding="utf-8"))


def make_llm_config(**overrides) -> LlmConfig:
    defaults = dict(
        endpoint_url="http://mock.invalid/chat/completions",
        model_name="mock-model",
        temperature=0.0,
        max_attempts=10,
        request_timeout=5.0,
        max_parallel_requests=8,
    )
    defaults.update(overrides)
    return LlmConfig(**defaults)


def gateway_for(script: MockScript, **config_overrides) -> ChatGateway:
    """In-process gateway wired straight to a mock script."""
    return ChatGateway(make_llm_config(**config_overrides), transport=as_transport(script))
