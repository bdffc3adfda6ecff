// Browser entry: wires the session to the canvas map, telemetry panel,
// mode buttons, keyboard drive and the parameter table.
//
// Keys: ArrowUp = forward, ArrowLeft/Right = yaw, W/S = climb.

import { arenaView, canvasToArena, drawArena, hitTestBlimp, MODE_COLORS } from "./arena.js";
import { DRIVE_KEYS, ManualDriver, MANUAL_PERIOD_MS } from "./manual.js";
import { ParamEditor } from "./params.js";
import { MODES } from "./protocol.js";
import { connectSession } from "./transport.js";

const url = new URLSearchParams(location.search).get("ws")
  ?? `ws://${location.hostname || "localhost"}:8765/ws`;

const { session } = connectSession(url);
const driver = new ManualDriver(session);
const editor = new ParamEditor(session);

const canvas = document.getElementById("map") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusEl = document.getElementById("status")!;
const promptEl = document.getElementById("prompt")!;
const fleetEl = document.getElementById("fleet")!;
const paramsEl = document.getElementById("params")!;
const logEl = document.getElementById("log")!;
const modesEl = document.getElementById("modes")!;

for (const mode of MODES) {
  const btn = document.createElement("button");
  btn.textContent = mode;
  btn.style.borderLeft = `6px solid ${MODE_COLORS[mode]}`;
  btn.onclick = () => {
    if (session.selected !== null) {
      session.send({ set_mode: { id: session.selected, mode } });
    }
  };
  modesEl.appendChild(btn);
}

const telBtn = document.createElement("button");
telBtn.textContent = "poll telemetry";
telBtn.onclick = () => {
  if (session.selected !== null) {
    session.send({ telemetry_req: { id: session.selected } });
  }
};
modesEl.appendChild(telBtn);

canvas.addEventListener("click", (ev) => {
  const rect = canvas.getBoundingClientRect();
  const view = arenaView(session.snapshot, session.selected, session.stale());
  const [x, y] = canvasToArena(
    view, ev.clientX - rect.left, ev.clientY - rect.top,
    canvas.width, canvas.height);
  const id = hitTestBlimp(view, x, y);
  if (id !== null) session.selectBlimp(id);
});

window.addEventListener("keydown", (ev) => {
  if (DRIVE_KEYS.includes(ev.code)) {
    ev.preventDefault();
    driver.keyDown(ev.code);
  }
});
window.addEventListener("keyup", (ev) => {
  if (DRIVE_KEYS.includes(ev.code)) {
    ev.preventDefault();
    driver.keyUp(ev.code);
  }
});

setInterval(() => driver.tick(), MANUAL_PERIOD_MS);
setInterval(() => editor.sweep(), 200);

function fleetRow(b: { id: number; mode: string; carrying: boolean;
                       r: number[]; last_detection: { valid: boolean; n: number } }) {
  const sel = b.id === session.selected ? "selected" : "";
  return `<tr class="${sel}" data-id="${b.id}">
    <td>${b.id}</td>
    <td style="color:${MODE_COLORS[b.mode] ?? "#ccc"}">${b.mode}</td>
    <td>${b.r[2].toFixed(2)} m</td>
    <td>${b.carrying ? "yes" : ""}</td>
    <td>${b.last_detection.valid ? `n=${b.last_detection.n}` : "—"}</td>
  </tr>`;
}

function paramRow(id: number, key: string, value: number) {
  const status = editor.statusOf(id, key);
  const badge = status ? `<span class="badge ${status}">${status}</span>` : "";
  return `<tr data-key="${key}">
    <td>${key}</td>
    <td><input type="number" step="any" value="${value}" data-key="${key}"></td>
    <td>${badge}</td>
  </tr>`;
}

paramsEl.addEventListener("change", (ev) => {
  const input = ev.target as HTMLInputElement;
  const key = input.dataset.key;
  if (key && session.selected !== null) {
    editor.edit(session.selected, key, Number(input.value));
  }
});

fleetEl.addEventListener("click", (ev) => {
  const row = (ev.target as HTMLElement).closest("tr[data-id]");
  if (row) session.selectBlimp(Number((row as HTMLElement).dataset.id));
});

function refreshPanels() {
  statusEl.textContent = session.stale()
    ? `${session.status} (stale)` : session.status;
  statusEl.className = session.stale() || session.status !== "connected"
    ? "bad" : "ok";
  promptEl.textContent = driver.blockedPrompt ?? "";

  const snap = session.snapshot;
  if (snap) {
    fleetEl.innerHTML =
      `<tr><th>id</th><th>mode</th><th>h</th><th>carry</th><th>det</th></tr>`
      + snap.blimps.map(fleetRow).join("");
  }
  if (session.selected !== null) {
    const rows = editor.knownParams(session.selected)
      .map(([k, v]) => paramRow(session.selected!, k, v)).join("");
    paramsEl.innerHTML =
      `<tr><th>key</th><th>value</th><th>status</th></tr>` + rows;
  }
  logEl.textContent = session.commandLog.slice(-12)
    .map((e) => e.wire).join("\n");
}

let paramsDirty = true;
setInterval(() => { paramsDirty = true; }, 1000);

function frame() {
  const view = arenaView(session.snapshot, session.selected, session.stale());
  drawArena(ctx, view, canvas.width, canvas.height);
  if (paramsDirty && !(document.activeElement instanceof HTMLInputElement)) {
    paramsDirty = false;
    refreshPanels();
  } else {
    statusEl.textContent = session.stale()
      ? `${session.status} (stale)` : session.status;
  }
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
