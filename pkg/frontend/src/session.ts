// The panel's whole state as a pure reducer over the node's event stream.
// Rendering and socket plumbing live elsewhere; everything testable is here.

import type { NodeEvent } from "./events.js";

export type CastState = "idle" | "pending" | "accepted" | "refused";

export interface EnvelopeNote {
  digest: string;
  type: string;
  sender: string;
  round: number;
}

export interface UiSession {
  role: string;
  phase: string;
  candidates: string[];
  envelopes: EnvelopeNote[];
  castState: CastState;
  receipt: string | null;
  verdict: string | null;
  totals: Record<string, number> | null;
  status: string | null;
  resultText: string | null;
  lastError: string | null;
}

export function initialSession(): UiSession {
  return {
    role: "observer",
    phase: "connecting",
    candidates: [],
    envelopes: [],
    castState: "idle",
    receipt: null,
    verdict: null,
    totals: null,
    status: null,
    resultText: null,
    lastError: null,
  };
}

export function applyEvent(state: UiSession, event: NodeEvent): UiSession {
  switch (event.event) {
    case "phase":
      return {
        ...state,
        phase: event.phase,
        candidates: event.candidates,
        role: event.role,
      };
    case "envelope":
      return {
        ...state,
        envelopes: [
          ...state.envelopes,
          {
            digest: event.digest,
            type: event.type,
            sender: event.sender,
            round: event.round,
          },
        ],
      };
    case "cast_ack":
      return {
        ...state,
        castState: event.accepted ? "accepted" : state.castState === "accepted" ? "accepted" : "refused",
      };
    case "receipt":
      return { ...state, receipt: event.ciphertext_digest };
    case "verdict":
      return { ...state, verdict: event.verdict };
    case "allege_ack":
      return state;
    case "totals":
      return {
        ...state,
        totals: event.totals,
        status: event.status,
        resultText: event.text,
      };
    case "error":
      return { ...state, lastError: event.reason };
  }
}

// A voter may cast exactly once, and only while the node is selecting.
export function canCast(state: UiSession): boolean {
  return (
    (state.role === "voter" || state.role === "distributor") &&
    state.phase === "Selecting" &&
    state.castState !== "pending" &&
    state.castState !== "accepted"
  );
}

// The allegation control arms only when this voter's own audit went red.
export function canAllege(state: UiSession): boolean {
  return (
    state.role === "voter" &&
    state.verdict !== null &&
    state.verdict !== "ok"
  );
}

export function verdictColor(state: UiSession): "green" | "red" | "none" {
  if (state.verdict === null) return "none";
  return state.verdict === "ok" ? "green" : "red";
}

// The tally the panel shows is the node's canonical result document,
// verbatim; byte-equality with `bvot tally` output is the contract.
export function formattedTally(state: UiSession): string | null {
  return state.resultText;
}
