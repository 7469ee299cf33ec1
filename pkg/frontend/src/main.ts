// Browser entry: connect to the local voter node's WebSocket lane and
// render the panel. The node port comes from the query string, e.g.
// index.html?port=8765

import { PanelClient } from "./client.js";
import { renderPanel } from "./panel.js";

const port = new URLSearchParams(window.location.search).get("port") ?? "8765";
const client = new PanelClient(`ws://127.0.0.1:${port}`,
                               (url) => new WebSocket(url));

const root = document.getElementById("panel");
if (!root) throw new Error("missing #panel container");
renderPanel(root, client);
client.open().catch((err) => {
  root.textContent = `cannot reach the local voter node on port ${port}: ${err}`;
});
