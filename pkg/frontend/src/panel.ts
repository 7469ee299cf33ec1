// Functional DOM panel: render(state) replaces the container's content.
// No framework, no polling; every repaint is driven by one stream event.

import type { PanelClient } from "./client.js";
import {
  canAllege,
  canCast,
  formattedTally,
  verdictColor,
  type UiSession,
} from "./session.js";

export function renderPanel(container: HTMLElement, client: PanelClient): void {
  const repaint = (state: UiSession) => {
    container.replaceChildren(
      header(state),
      ballot(state, client),
      auditView(state, client),
      tallyView(state),
      transcript(state),
    );
  };
  client.onChange(repaint);
  repaint(client.state);
}

function el(tag: string, text?: string, className?: string): HTMLElement {
  const node = document.createElement(tag);
  if (text !== undefined) node.textContent = text;
  if (className) node.className = className;
  return node;
}

function header(state: UiSession): HTMLElement {
  const box = el("header");
  box.append(
    el("h1", "bvot voter panel"),
    el("p", `role: ${state.role} · phase: ${state.phase}`),
  );
  return box;
}

function ballot(state: UiSession, client: PanelClient): HTMLElement {
  const box = el("section", undefined, "ballot");
  if (state.role === "observer") {
    box.append(el("p", "observing: no vote controls"));
    return box;
  }
  box.append(el("h2", "cast your vote"));
  const enabled = canCast(state);
  for (const name of state.candidates) {
    const button = el("button", name) as HTMLButtonElement;
    button.disabled = !enabled;
    button.onclick = () => client.castVote(name);
    box.append(button);
  }
  if (state.castState === "accepted") {
    box.append(el("p", `vote accepted · receipt ${state.receipt ?? "pending"}`,
                  "receipt"));
  } else if (state.castState === "refused") {
    box.append(el("p", "cast refused by the node", "error"));
  }
  return box;
}

function auditView(state: UiSession, client: PanelClient): HTMLElement {
  const box = el("section", undefined, "audit");
  box.append(el("h2", "audit"));
  const color = verdictColor(state);
  if (color === "none") {
    box.append(el("p", "mapping not revealed yet"));
    return box;
  }
  box.append(el("p",
    color === "green" ? "received prime matches the revealed mapping"
      : `AUDIT FAILED: ${state.verdict}`,
    `verdict-${color}`));
  const allege = el("button", "file allegation") as HTMLButtonElement;
  allege.disabled = !canAllege(state);
  allege.onclick = () =>
    client.fileAllegation("received masked prime does not match the mapping");
  box.append(allege);
  return box;
}

function tallyView(state: UiSession): HTMLElement {
  const box = el("section", undefined, "tally");
  box.append(el("h2", "tally"));
  if (state.totals === null && state.status === null) {
    box.append(el("p", "polls open"));
    return box;
  }
  box.append(el("p", `election ${state.status}`));
  if (state.totals) {
    const table = el("table");
    for (const [name, count] of Object.entries(state.totals)) {
      const row = el("tr");
      row.append(el("td", name), el("td", String(count)));
      table.append(row);
    }
    box.append(table);
  }
  const text = formattedTally(state);
  if (text) {
    box.append(el("pre", text, "result-document"));
  }
  return box;
}

function transcript(state: UiSession): HTMLElement {
  const box = el("section", undefined, "transcript");
  box.append(el("h2", `bus transcript (${state.envelopes.length} envelopes)`));
  const list = el("ul");
  for (const note of state.envelopes.slice(-12)) {
    list.append(el("li",
      `r${note.round} ${note.type} from ${note.sender} · ${note.digest.slice(0, 12)}`));
  }
  box.append(list);
  return box;
}
