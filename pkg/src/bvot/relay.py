"""Star-topology relay: the single sequencing point for live elections.

The relay fixes the total broadcast order and routes the OT lane's addressed
frames; it is untrusted for content (parties verify every signature) but
trusted for liveness.  Wire format: 4-byte big-endian length prefix, then a
JSON object.  Frames:

    {"hello": party_id}                                  (first frame)
    {"kind": "broadcast", "envelope": {...}}             -> fanned out to all
    {"kind": "direct", "to": pid, "frame": {...}}        -> routed to one peer
"""

from __future__ import annotations

import asyncio
import json


async def read_frame(reader: asyncio.StreamReader) -> dict | None:
    try:
        header = await reader.readexactly(4)
    except (asyncio.IncompleteReadError, ConnectionResetError):
        return None
    size = int.from_bytes(header, "big")
    try:
        body = await reader.readexactly(size)
    except (asyncio.IncompleteReadError, ConnectionResetError):
        return None
    return json.loads(body)


def frame_bytes(obj: dict) -> bytes:
    body = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return len(body).to_bytes(4, "big") + body


class Relay:
    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        self.host = host
        self.port = port
        self._writers: dict[str, asyncio.StreamWriter] = {}
        self._order_lock = asyncio.Lock()
        self._server: asyncio.AbstractServer | None = None
        self.broadcast_count = 0
        # late joiners replay the whole broadcast history, so connection
        # order never loses messages; directed frames queue per party
        self._history: list[bytes] = []
        self._parked_direct: dict[str, list[bytes]] = {}

    async def start(self) -> None:
        self._server = await asyncio.start_server(self._handle, self.host, self.port)
        self.port = self._server.sockets[0].getsockname()[1]

    async def serve_forever(self) -> None:
        if self._server is None:
            await self.start()
        async with self._server:
            await self._server.serve_forever()

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
        for writer in list(self._writers.values()):
            writer.close()

    async def _handle(self, reader: asyncio.StreamReader,
                      writer: asyncio.StreamWriter) -> None:
        hello = await read_frame(reader)
        if not hello or "hello" not in hello:
            writer.close()
            return
        party_id = hello["hello"]
        async with self._order_lock:
            self._writers[party_id] = writer
            for data in self._history:
                writer.write(data)
            for data in self._parked_direct.pop(party_id, []):
                writer.write(data)
            await writer.drain()
        try:
            while True:
                frame = await read_frame(reader)
                if frame is None:
                    break
                kind = frame.get("kind")
                if kind == "broadcast":
                    await self._fan_out(frame)
                elif kind == "direct":
                    await self._route(party_id, frame)
        finally:
            self._writers.pop(party_id, None)
            writer.close()

    async def _fan_out(self, frame: dict) -> None:
        # one lock serializes ordering decisions: every subscriber sees the
        # same total order over its in-order TCP stream
        async with self._order_lock:
            self.broadcast_count += 1
            data = frame_bytes({"kind": "broadcast", "envelope": frame["envelope"]})
            self._history.append(data)
            for writer in list(self._writers.values()):
                writer.write(data)
            await asyncio.gather(*(w.drain() for w in list(self._writers.values())),
                                 return_exceptions=True)

    async def _route(self, sender: str, frame: dict) -> None:
        data = frame_bytes({"kind": "direct", "from": sender,
                            "frame": frame["frame"]})
        async with self._order_lock:
            target = self._writers.get(frame.get("to"))
            if target is None:
                self._parked_direct.setdefault(frame.get("to"), []).append(data)
                return
            target.write(data)
            await target.drain()


async def run_relay(host: str, port: int) -> None:
    relay = Relay(host, port)
    await relay.start()
    print(f"relay listening on {relay.host}:{relay.port}", flush=True)
    await relay.serve_forever()
