"""HTTP facade over a running TwinService.

Read endpoints only look at service state and never touch the swap lock, so
they stay responsive while a retrain runs.  The event stream first replays
the latest prediction per device (so a fresh dashboard paints immediately)
and then follows live publishes.
"""

from __future__ import annotations

import asyncio
import contextlib
import json
import queue
import socket
import threading

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse

from .core import NettwinError
from .netsim import NoNeighbor, UnknownDevice
from .service import ControllerUnreachable, TwinService

STREAM_KEEPALIVE_SECONDS = 1.0


class BindFailure(NettwinError):
    """The requested host:port cannot be bound."""


def check_bind(host: str, port: int) -> None:
    """Probe the listen address before handing it to the server."""
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        probe.bind((host, port))
    except OSError as exc:
        raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc
    finally:
        probe.close()


def create_app(
    service: TwinService, tick_wall_seconds: float | None = None
) -> FastAPI:
    """Build the API app; optionally run the live-sim ticker while serving."""

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        stop = threading.Event()
        ticker = None
        if tick_wall_seconds is not None and service.sim is not None:

            def run() -> None:
                while not stop.wait(tick_wall_seconds):
                    service.step()

            ticker = threading.Thread(target=run, name="twin-ticker", daemon=True)
            ticker.start()
        try:
            yield
        finally:
            stop.set()
            if ticker is not None:
                ticker.join(timeout=5.0)

    app = FastAPI(title="nettwin", docs_url=None, redoc_url=None, lifespan=lifespan)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],  # dashboard is served from its own origin
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/topology")
    def topology() -> dict:
        if service.sim is None:
            return {"devices": [], "links": []}
        return service.sim.topology.to_json_dict()

    @app.get("/devices")
    def devices() -> list[dict]:
        return service.device_rows()

    @app.get("/devices/{device_id}/attribution")
    def attribution(device_id: str) -> dict:
        try:
            return service.attribution_for(device_id)
        except KeyError:
            raise HTTPException(404, f"no snapshot seen yet for {device_id!r}") from None

    @app.get("/model")
    def model() -> dict:
        return service.model_info()

    @app.post("/mitigate")
    async def mitigate(request: Request) -> dict:
        try:
            body = await request.json()
        except json.JSONDecodeError:
            raise HTTPException(400, "body must be JSON") from None
        device_id = body.get("device_id")
        action = body.get("action")
        if not isinstance(device_id, str) or not isinstance(action, str):
            raise HTTPException(400, "device_id and action are required strings")
        try:
            receipt = service.mitigate(device_id, action)
        except ValueError as exc:
            raise HTTPException(400, str(exc)) from None
        except UnknownDevice as exc:
            raise HTTPException(404, str(exc)) from None
        except NoNeighbor as exc:
            raise HTTPException(409, str(exc)) from None
        except ControllerUnreachable as exc:
            raise HTTPException(502, str(exc)) from None
        return receipt

    @app.get("/stream")
    async def stream() -> StreamingResponse:
        q = service.subscribe()
        with service._state_lock:
            backlog = [
                service.latest_predictions[d]
                for d in sorted(service.latest_predictions)
            ]

        async def gen():
            try:
                for pred in backlog:
                    yield _sse(pred.to_json_dict())
                while True:
                    try:
                        pred = await asyncio.to_thread(
                            q.get, True, STREAM_KEEPALIVE_SECONDS
                        )
                    except queue.Empty:
                        yield ": keepalive\n\n"
                        continue
                    yield _sse(pred.to_json_dict())
            finally:
                service.unsubscribe(q)

        return StreamingResponse(gen(), media_type="text/event-stream")

    return app


def _sse(doc: dict) -> str:
    return f"data: {json.dumps(doc, sort_keys=True)}\n\n"
