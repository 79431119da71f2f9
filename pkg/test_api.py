"""
Tests for the HTTP surface.
"""

import httpx
import pytest
import pytest_asyncio

from main import app


@pytest_asyncio.fixture
async def client():
    transport = httpx.ASGITransport(app=app)
    async with httpx.AsyncClient(transport=transport, base_url="http://test") as c:
        yield c


@pytest.mark.asyncio
async def test_health(client):
    response = await client.get("/health")
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "healthy"
    assert body["service"] == "Sobolev Lab"


@pytest.mark.asyncio
async def test_root_lists_surfaces_and_suites(client):
    body = (await client.get("/")).json()
    assert "catenoid" in body["surfaces"]
    assert "ot-experiment" in body["suites"]


@pytest.mark.asyncio
async def test_constants(client):
    response = await client.get("/lab/constants", params={"n": 3, "m": 4, "p": 1.5})
    assert response.status_code == 200
    table = response.json()
    assert {"AT", "C", "C_tilde", "S_tilde"} <= {row["name"] for row in table["rows"]}
    assert table["verdicts"][0]["passed"] is True


@pytest.mark.asyncio
async def test_constants_outside_window(client):
    response = await client.get("/lab/constants", params={"n": 2, "p": 2})
    assert response.status_code == 422
    body = response.json()
    assert body["type"] == "UsageError"
    assert "error" in body and "details" in body


@pytest.mark.asyncio
async def test_constants_theorem_range(client):
    response = await client.get("/lab/constants", params={"n": 3, "m": 0, "p": 2.5})
    assert response.status_code == 200
    response = await client.get("/lab/constants", params={"n": 3, "m": 1, "p": 1.5, "t": 0.5})
    assert response.status_code == 200
    assert "C_t" in {row["name"] for row in response.json()["rows"]}


@pytest.mark.asyncio
async def test_suites(client):
    body = (await client.get("/lab/suites")).json()
    assert "identities" in body["http"]
    assert "ot-experiment" in body["cli_only"]


@pytest.mark.asyncio
async def test_verify_unknown_suite(client):
    response = await client.post("/lab/verify/everything")
    assert response.status_code == 404
    assert response.json()["detail"]["error"] == "Unknown suite: everything"


@pytest.mark.asyncio
async def test_verify_long_suite_refused(client):
    response = await client.post("/lab/verify/ot-experiment")
    assert response.status_code == 400


@pytest.mark.asyncio
async def test_verify_asymptotics(client):
    response = await client.post("/lab/verify/asymptotics")
    assert response.status_code == 200
    report = response.json()
    assert report["suite"] == "asymptotics"
    assert report["passed"] is True
