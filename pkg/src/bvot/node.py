"""Live party node: relay connection, protocol state machine, and the
WebSocket lane that a browser panel drives.

The UI lane never sees keys or OT secrets; it receives phase/progress events
as newline-style JSON texts over a WebSocket and may send back exactly two
commands: cast and allege.  Killing the UI never stalls the protocol.
"""

from __future__ import annotations

import asyncio
import json
import random

from .protocol import (
    ABORTED,
    DistributorNode,
    ElectionConfig,
    ObserverNode,
    VoterNode,
)
from .relay import frame_bytes, read_frame
from .transport import Envelope, Signer


def ui_event(kind: str, **fields) -> str:
    return json.dumps({"event": kind, **fields}, sort_keys=True)


class LiveNode:
    """Drives one protocol party over a relay connection."""

    def __init__(self, config: ElectionConfig, party_id: str, signer: Signer,
                 rng: random.Random, choice: int | None = None,
                 role: str = "voter", ui_port: int | None = None,
                 log_path: str | None = None,
                 round_timeout: float | None = None,
                 fault: str | None = None):
        cls = {"voter": VoterNode, "distributor": DistributorNode,
               "observer": ObserverNode}[role]
        if fault is not None:
            from .simulate import CorruptOpeningDistributor, SwappingDistributor
            if role != "distributor":
                raise ValueError("live fault injection is distributor-only")
            cls = {"distributor-swap": SwappingDistributor,
                   "corrupt-opening": CorruptOpeningDistributor}[fault]
        if role == "observer":
            self.party = cls(config, party_id, signer, rng)
        else:
            self.party = cls(config, party_id, signer, rng, choice=choice)
        self.config = config
        self.role = role
        self.ui_port = ui_port
        self.log_path = log_path
        self.round_timeout = round_timeout if round_timeout is not None \
            else (config.round_timeout or 60.0)
        self._writer: asyncio.StreamWriter | None = None
        self._ui_clients: set = set()
        self._last_phase = None
        self._receipt_sent = False
        self._verdict_sent = False
        self._ui_server = None

    # -- relay side -----------------------------------------------------------

    async def run(self, host: str, port: int) -> None:
        reader, writer = await asyncio.open_connection(host, port)
        self._writer = writer
        writer.write(frame_bytes({"hello": self.party.party_id}))
        await writer.drain()
        if self.ui_port is not None:
            await self._start_ui()
        self.party.start()
        await self._flush()
        try:
            while not self.party.finished:
                try:
                    frame = await asyncio.wait_for(read_frame(reader),
                                                   timeout=self.round_timeout)
                except asyncio.TimeoutError:
                    self.party.on_timeout()
                    await self._flush()
                    break
                if frame is None:
                    break
                if frame.get("kind") == "broadcast":
                    env = Envelope.from_dict(frame["envelope"])
                    self.party.deliver(env)
                    await self._emit(ui_event("envelope", digest=env.digest(),
                                              type=env.msg_type,
                                              sender=env.sender_id,
                                              round=env.round))
                elif frame.get("kind") == "direct":
                    self.party.deliver_frame(frame["from"], frame["frame"])
                await self._flush()
        finally:
            await self._finish_up()
            writer.close()

    async def _flush(self) -> None:
        assert self._writer is not None
        for env in self.party.take_outbox():
            self._writer.write(frame_bytes({"kind": "broadcast",
                                            "envelope": env.to_dict()}))
        for to, frame in self.party.take_lane_outbox():
            self._writer.write(frame_bytes({"kind": "direct", "to": to,
                                            "frame": frame}))
        await self._writer.drain()
        await self._announce_state()

    async def _announce_state(self) -> None:
        if self.party.phase != self._last_phase:
            self._last_phase = self.party.phase
            await self._emit(ui_event("phase", phase=self.party.phase,
                                      candidates=self.config.candidate_names,
                                      role=self.role))
        if getattr(self.party, "record", None) is not None and not self._receipt_sent:
            self._receipt_sent = True
            await self._emit(ui_event("receipt",
                                      ciphertext_digest=_record_digest(self.party.record)))
        if getattr(self.party, "audit_verdict", None) is not None \
                and not self._verdict_sent:
            self._verdict_sent = True
            await self._emit(ui_event("verdict", verdict=self.party.audit_verdict))

    async def _finish_up(self) -> None:
        if self.log_path:
            self.party.log.save(self.log_path)
        if self.party.result is not None:
            await self._emit(ui_event("totals",
                                      totals=self.party.result.totals,
                                      status=self.party.result.status,
                                      text=self.party.result.text()))
            print(self.party.result.text(), flush=True)
        elif self.party.phase == ABORTED:
            await self._emit(ui_event("totals", totals=None, status="aborted",
                                      text=""))
            print(json.dumps({"status": "aborted",
                              "party": self.party.party_id}), flush=True)
        # give UI clients a beat to read the final event, then retire
        if self._ui_clients:
            await asyncio.sleep(0.2)
        if self._ui_server is not None:
            self._ui_server.close()

    # -- UI lane ----------------------------------------------------------------

    async def _start_ui(self) -> None:
        import websockets

        async def handle(ws):
            self._ui_clients.add(ws)
            try:
                await ws.send(ui_event("phase", phase=self.party.phase,
                                       candidates=self.config.candidate_names,
                                       role=self.role))
                async for raw in ws:
                    await self._on_command(json.loads(raw), ws)
            finally:
                self._ui_clients.discard(ws)

        self._ui_server = await websockets.serve(handle, "127.0.0.1", self.ui_port)
        self.ui_port = self._ui_server.sockets[0].getsockname()[1]

    async def _on_command(self, cmd: dict, ws) -> None:
        kind = cmd.get("cmd")
        if kind == "cast" and self.role in ("voter", "distributor"):
            candidate = cmd.get("candidate")
            if isinstance(candidate, str):
                candidate = self.config.candidate_names.index(candidate)
            accepted = self.party.request_cast(int(candidate))
            await ws.send(ui_event("cast_ack", accepted=accepted))
            if accepted:
                await self._flush()
        elif kind == "allege" and self.role in ("voter",):
            accepted = self.party.file_allegation(cmd.get("text", "manual allegation"))
            await ws.send(ui_event("allege_ack", accepted=accepted))
            if accepted:
                await self._flush()
        else:
            await ws.send(ui_event("error", reason=f"unknown command {kind!r}"))

    async def _emit(self, text: str) -> None:
        dead = []
        for ws in self._ui_clients:
            try:
                await ws.send(text)
            except Exception:
                dead.append(ws)
        for ws in dead:
            self._ui_clients.discard(ws)


def _record_digest(record) -> str:
    import hashlib
    from .messages import canonical_bytes, enc_ciphertext
    return hashlib.sha256(canonical_bytes(enc_ciphertext(record.ciphertext))).hexdigest()
