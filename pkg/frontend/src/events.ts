// Event stream and command schema of the voter node's WebSocket lane.
// The panel is a pure view over this stream: it never sees keys, OT
// secrets, or anything that is not already public protocol state.

export interface PhaseEvent {
  event: "phase";
  phase: string;
  candidates: string[];
  role: string;
}

export interface EnvelopeEvent {
  event: "envelope";
  digest: string;
  type: string;
  sender: string;
  round: number;
}

export interface CastAckEvent {
  event: "cast_ack";
  accepted: boolean;
}

export interface AllegeAckEvent {
  event: "allege_ack";
  accepted: boolean;
}

export interface ReceiptEvent {
  event: "receipt";
  ciphertext_digest: string;
}

export interface VerdictEvent {
  event: "verdict";
  verdict: string; // "ok" | "mismatch" | "commitment-mismatch"
}

export interface TotalsEvent {
  event: "totals";
  totals: Record<string, number> | null;
  status: string;
  text: string; // the canonical result document, byte-equal to `bvot tally`
}

export interface ErrorEvent {
  event: "error";
  reason: string;
}

export type NodeEvent =
  | PhaseEvent
  | EnvelopeEvent
  | CastAckEvent
  | AllegeAckEvent
  | ReceiptEvent
  | VerdictEvent
  | TotalsEvent
  | ErrorEvent;

export interface CastCommand {
  cmd: "cast";
  candidate: string | number;
}

export interface AllegeCommand {
  cmd: "allege";
  text: string;
}

export type NodeCommand = CastCommand | AllegeCommand;

export function parseEvent(raw: string): NodeEvent {
  return JSON.parse(raw) as NodeEvent;
}
