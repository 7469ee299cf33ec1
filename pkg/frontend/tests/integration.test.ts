// Full-stack drive: real relay, real voter nodes (spawned bvot processes),
// three PanelClients over real WebSockets. Requires the Python package to
// be installed (`pip install -e ..`).

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { createHash } from "node:crypto";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterEach, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { PanelClient, type SocketLike } from "../src/client.js";
import { canAllege } from "../src/session.js";

const haveBvot = spawnSync("bvot", ["--help"], { encoding: "utf8" }).status === 0;

// the node hashes the canonical ciphertext encoding: compact JSON, sorted keys
function ciphertextDigest(ciphertext: Record<string, string>): string {
  const canonical = JSON.stringify(
    Object.fromEntries(Object.entries(ciphertext).sort(([a], [b]) => (a < b ? -1 : 1))),
  );
  return createHash("sha256").update(canonical).digest("hex");
}

const children: ChildProcess[] = [];

function launch(args: string[]): ChildProcess {
  const child = spawn("bvot", args, { stdio: ["ignore", "pipe", "pipe"] });
  children.push(child);
  return child;
}

afterEach(() => {
  for (const child of children.splice(0)) child.kill("SIGKILL");
});

function connectPanel(port: number): Promise<PanelClient> {
  const client = new PanelClient(
    `ws://127.0.0.1:${port}`,
    (url) => new WebSocket(url) as unknown as SocketLike,
  );
  // the node binds its UI endpoint shortly after start; retry briefly
  const attempt = async (): Promise<PanelClient> => {
    for (let i = 0; i < 100; i++) {
      try {
        await client.open();
        return client;
      } catch {
        await new Promise((r) => setTimeout(r, 100));
      }
    }
    throw new Error(`UI endpoint on ${port} never came up`);
  };
  return attempt();
}

function stdoutOf(child: ChildProcess): Promise<string> {
  let buffer = "";
  child.stdout!.on("data", (chunk) => (buffer += chunk));
  return new Promise((resolve) => child.on("exit", () => resolve(buffer)));
}

async function setupElection(dir: string, seed: number): Promise<void> {
  const setup = launch(["setup", "--out", dir, "--n", "3", "--m", "3",
                        "--lam", "3", "--seed", String(seed)]);
  await new Promise((resolve) => setup.on("exit", resolve));
}

describe.runIf(haveBvot)("live election driven from three panels", () => {
  it("totals are byte-equal to bvot tally on the same log", async () => {
    const dir = mkdtempSync(join(tmpdir(), "bvot-ui-"));
    const seed = 501;
    await setupElection(dir, seed);
    const relayPort = 7881;
    const uiPorts = { v1: 8831, v2: 8832, v3: 8833 };
    launch(["relay", "--port", String(relayPort)]);
    await new Promise((r) => setTimeout(r, 800));
    const config = join(dir, "config.json");
    launch(["distributor", "--config", config, "--key", join(dir, "v1.key"),
            "--relay-port", String(relayPort), "--seed", String(seed),
            "--ui-port", String(uiPorts.v1), "--timeout", "30",
            "--log", join(dir, "v1-bus.jsonl")]);
    launch(["voter", "--config", config, "--key", join(dir, "v2.key"),
            "--relay-port", String(relayPort), "--seed", String(seed),
            "--ui-port", String(uiPorts.v2), "--timeout", "30",
            "--log", join(dir, "v2-bus.jsonl")]);
    launch(["voter", "--config", config, "--key", join(dir, "v3.key"),
            "--relay-port", String(relayPort), "--seed", String(seed),
            "--ui-port", String(uiPorts.v3), "--timeout", "30",
            "--log", join(dir, "v3-bus.jsonl")]);

    const panels = {
      v1: await connectPanel(uiPorts.v1),
      v2: await connectPanel(uiPorts.v2),
      v3: await connectPanel(uiPorts.v3),
    };
    const ballots: Record<string, string> = {
      v1: "candidate-1", v2: "candidate-2", v3: "candidate-2",
    };
    for (const [pid, panel] of Object.entries(panels)) {
      await panel.waitFor((s) => s.phase === "Selecting");
      expect(panel.castVote(ballots[pid])).toBe(true);
      expect(panel.castVote(ballots[pid])).toBe(false); // double click: no-op
    }
    const finals = await Promise.all(
      Object.values(panels).map((p) => p.waitFor((s) => s.resultText !== null)),
    );
    const texts = new Set(finals.map((s) => s.resultText));
    expect(texts.size).toBe(1);
    const uiText = finals[0].resultText!;
    expect(finals[0].totals).toEqual({
      "candidate-1": 1, "candidate-2": 2, "candidate-3": 0,
    });

    // byte-for-byte against the CLI tally of the same persisted log
    const tally = launch(["tally", "--log", join(dir, "v2-bus.jsonl"),
                          "--config", config]);
    const tallyOut = await stdoutOf(tally);
    expect(tallyOut.trim()).toBe(uiText);

    // each panel's receipt is the digest of the ciphertext that actually
    // landed on the bus for that voter
    const entries = readFileSync(join(dir, "v2-bus.jsonl"), "utf8")
      .trim().split("\n").map((line) => JSON.parse(line));
    for (const [pid, panel] of Object.entries(panels)) {
      expect(panel.state.receipt).toBeTruthy();
      expect(panel.state.verdict === null || panel.state.verdict === "ok").toBe(true);
      const vote = entries.find(
        (e) => e.msg_type === "encrypted_vote" && e.sender_id === pid,
      );
      expect(vote).toBeDefined();
      expect(ciphertextDigest(vote.payload.ciphertext)).toBe(panel.state.receipt);
    }
    for (const panel of Object.values(panels)) panel.close();
  }, 90_000);

  it("a distributor swap turns exactly the wronged panel red", async () => {
    const dir = mkdtempSync(join(tmpdir(), "bvot-ui-"));
    const seed = 502;
    await setupElection(dir, seed);
    const relayPort = 7882;
    const uiPorts = { v1: 8841, v2: 8842, v3: 8843 };
    launch(["relay", "--port", String(relayPort)]);
    await new Promise((r) => setTimeout(r, 800));
    const config = join(dir, "config.json");
    launch(["distributor", "--config", config, "--key", join(dir, "v1.key"),
            "--relay-port", String(relayPort), "--seed", String(seed),
            "--ui-port", String(uiPorts.v1), "--timeout", "30",
            "--fault", "distributor-swap"]);
    launch(["voter", "--config", config, "--key", join(dir, "v2.key"),
            "--relay-port", String(relayPort), "--seed", String(seed),
            "--ui-port", String(uiPorts.v2), "--timeout", "30"]);
    launch(["voter", "--config", config, "--key", join(dir, "v3.key"),
            "--relay-port", String(relayPort), "--seed", String(seed),
            "--ui-port", String(uiPorts.v3), "--timeout", "30"]);

    const panels = {
      v1: await connectPanel(uiPorts.v1),
      v2: await connectPanel(uiPorts.v2),
      v3: await connectPanel(uiPorts.v3),
    };
    // the swap exchanges candidate blocks 1 and 2: v2 walks into it,
    // v3 votes in the untouched third block
    const ballots: Record<string, string> = {
      v1: "candidate-3", v2: "candidate-1", v3: "candidate-3",
    };
    for (const [pid, panel] of Object.entries(panels)) {
      await panel.waitFor((s) => s.phase === "Selecting");
      expect(panel.castVote(ballots[pid])).toBe(true);
    }
    const v2 = await panels.v2.waitFor((s) => s.verdict !== null);
    const v3 = await panels.v3.waitFor((s) => s.verdict !== null);
    expect(v2.verdict).toBe("mismatch");
    expect(v3.verdict).toBe("ok");
    expect(canAllege(v2)).toBe(true);
    expect(canAllege(v3)).toBe(false);

    // the armed control really files: the node acknowledges the command
    expect(panels.v2.fileAllegation("prime does not match the mapping")).toBe(true);
    expect(panels.v3.fileAllegation("should be refused")).toBe(false);

    // the halt reaches every panel: aborted, no totals published
    const ends = await Promise.all(
      Object.values(panels).map((p) => p.waitFor((s) => s.status !== null)),
    );
    for (const end of ends) {
      expect(end.status).toBe("aborted");
      expect(end.totals).toBeNull();
    }
    for (const panel of Object.values(panels)) panel.close();
  }, 90_000);
});
