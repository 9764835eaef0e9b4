import init, { loss_breakdown, loss_curve, descend, augment_preview, gam_maps } from "./pkg/linekit_web.js";

const $ = (id) => document.getElementById(id);

// ---- loss explorer ----

const SCALE = 36; // canvas pixels per box unit
const gt = [3, 3, 6, 6];
let pred = [1.5, 4, 5, 8.5];
let trail = [];

function drawBox(ctx, b, color, width = 2) {
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.strokeRect(b[0] * SCALE, b[1] * SCALE, (b[2] - b[0]) * SCALE, (b[3] - b[1]) * SCALE);
}

function gamma() {
  return parseFloat($("gamma").value);
}

function renderLoss() {
  const ctx = $("loss-canvas").getContext("2d");
  ctx.clearRect(0, 0, 360, 360);
  ctx.strokeStyle = "#eee";
  ctx.lineWidth = 1;
  for (let i = 0; i <= 10; i++) {
    ctx.beginPath(); ctx.moveTo(i * SCALE, 0); ctx.lineTo(i * SCALE, 360); ctx.stroke();
    ctx.beginPath(); ctx.moveTo(0, i * SCALE); ctx.lineTo(360, i * SCALE); ctx.stroke();
  }
  for (const b of trail) drawBox(ctx, b, "rgba(50,100,200,0.25)", 1);
  drawBox(ctx, gt, "#2a2");
  drawBox(ctx, pred, "#36c");

  const v = loss_breakdown(new Float64Array(pred), new Float64Array(gt), gamma());
  const rows = [
    ["IoU", v[0]], ["1 - IoU", v[1]], ["distance", v[2]], ["aspect", v[3]],
    ["EIoU", v[4]], ["Focal-EIoU", v[5]],
    ["d/dx1", v[6]], ["d/dy1", v[7]], ["d/dx2", v[8]], ["d/dy2", v[9]],
  ];
  $("loss-table").innerHTML = rows.map(([k, x]) => `<tr><td>${k}</td><td>${x.toFixed(6)}</td></tr>`).join("");

  const c = loss_curve(new Float64Array(pred), new Float64Array(gt), gamma(), 5, 121);
  const cv = $("curve-canvas").getContext("2d");
  cv.clearRect(0, 0, 360, 160);
  let max = 0;
  for (let i = 0; i < c.length; i += 3) max = Math.max(max, c[i + 1], c[i + 2]);
  const plot = (offset, color) => {
    cv.strokeStyle = color;
    cv.lineWidth = 2;
    cv.beginPath();
    for (let i = 0; i < c.length; i += 3) {
      const x = ((c[i] + 5) / 10) * 360;
      const y = 155 - (c[i + offset] / max) * 145;
      i === 0 ? cv.moveTo(x, y) : cv.lineTo(x, y);
    }
    cv.stroke();
  };
  plot(1, "#c33");
  plot(2, "#36c");
  cv.strokeStyle = "#999";
  cv.beginPath(); cv.moveTo(180, 0); cv.lineTo(180, 160); cv.stroke();
}

let drag = null;

function setupLoss() {
  const canvas = $("loss-canvas");
  const toUnits = (e) => {
    const r = canvas.getBoundingClientRect();
    return [(e.clientX - r.left) / SCALE, (e.clientY - r.top) / SCALE];
  };
  canvas.addEventListener("mousedown", (e) => {
    const [x, y] = toUnits(e);
    const near = (a, b) => Math.abs(a - b) < 0.35;
    if (near(x, pred[2]) && near(y, pred[3])) drag = { kind: "corner" };
    else if (near(x, pred[0]) && near(y, pred[1])) drag = { kind: "origin" };
    else if (x > pred[0] && x < pred[2] && y > pred[1] && y < pred[3]) drag = { kind: "move", x, y, start: pred.slice() };
    trail = [];
  });
  window.addEventListener("mouseup", () => { drag = null; });
  canvas.addEventListener("mousemove", (e) => {
    if (!drag) return;
    const [x, y] = toUnits(e);
    if (drag.kind === "corner") pred = [pred[0], pred[1], Math.max(x, pred[0] + 0.2), Math.max(y, pred[1] + 0.2)];
    else if (drag.kind === "origin") pred = [Math.min(x, pred[2] - 0.2), Math.min(y, pred[3] - 0.2), pred[2], pred[3]];
    else {
      const dx = x - drag.x, dy = y - drag.y;
      pred = [drag.start[0] + dx, drag.start[1] + dy, drag.start[2] + dx, drag.start[3] + dy];
    }
    renderLoss();
  });
  $("gamma").addEventListener("input", () => { $("gamma-val").textContent = gamma(); renderLoss(); });
  $("descend").addEventListener("click", () => {
    const path = descend(new Float64Array(pred), new Float64Array(gt), gamma(), $("use-focal").checked, 2.0, 200);
    trail = [];
    for (let i = 0; i < path.length; i += 4) trail.push(Array.from(path.slice(i, i + 4)));
    let i = 0;
    const step = () => {
      pred = trail[i];
      renderLoss();
      if (i === trail.length - 1) return;
      i = Math.min(i + 4, trail.length - 1);
      requestAnimationFrame(step);
    };
    step();
  });
  renderLoss();
}

// ---- augmentation ----

const CLASSES = ["trash", "twig", "nest", "kite", "bird", "balloon"];
const DEFAULT_PARAM = { none: 0, rotate: 90, brightness: 1.4, saltpepper: 0.02, occlude: 0.5 };

function renderAug() {
  const kind = $("aug-kind").value;
  let prev;
  try {
    prev = augment_preview(kind, parseFloat($("aug-param").value) || 0, parseInt($("aug-seed").value, 10) || 0);
  } catch (err) {
    $("aug-info").textContent = String(err);
    return;
  }
  const canvas = $("aug-canvas");
  canvas.width = prev.width;
  canvas.height = prev.height;
  const ctx = canvas.getContext("2d");
  ctx.putImageData(new ImageData(new Uint8ClampedArray(prev.rgba()), prev.width, prev.height), 0, 0);
  const boxes = prev.boxes();
  ctx.font = "11px sans-serif";
  for (let i = 0; i < boxes.length; i += 5) {
    const [c, x1, y1, x2, y2] = boxes.slice(i, i + 5);
    ctx.strokeStyle = "#ff0";
    ctx.lineWidth = 1;
    ctx.strokeRect(x1 + 0.5, y1 + 0.5, x2 - x1 - 1, y2 - y1 - 1);
    ctx.fillStyle = "#ff0";
    ctx.fillText(CLASSES[c] ?? c, x1 + 2, y1 - 3);
  }
  $("aug-info").textContent = `${prev.width} x ${prev.height}, ${boxes.length / 5} labels`;
}

function setupAug() {
  $("aug-kind").addEventListener("change", () => {
    $("aug-param").value = DEFAULT_PARAM[$("aug-kind").value];
    renderAug();
  });
  $("aug-param").addEventListener("input", renderAug);
  $("aug-seed").addEventListener("input", renderAug);
  renderAug();
}

// ---- GAM ----

const GRID = 32;
let blob = [10, 20];

function heat(canvas, values) {
  const ctx = canvas.getContext("2d");
  const cell = canvas.width / GRID;
  let lo = Infinity, hi = -Infinity;
  for (const v of values) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
  for (let i = 0; i < values.length; i++) {
    const t = hi > lo ? (values[i] - lo) / (hi - lo) : 0.5;
    ctx.fillStyle = `rgb(${Math.round(255 * t)}, ${Math.round(80 + 100 * t)}, ${Math.round(255 * (1 - t))})`;
    ctx.fillRect((i % GRID) * cell, Math.floor(i / GRID) * cell, cell, cell);
  }
}

function renderGam() {
  const maps = gam_maps(parseInt($("gam-seed").value, 10) || 0, GRID, blob[0], blob[1]);
  heat($("gate-canvas"), maps.slice(0, GRID * GRID));
  heat($("out-canvas"), maps.slice(GRID * GRID));
}

function setupGam() {
  for (const id of ["gate-canvas", "out-canvas"]) {
    $(id).addEventListener("click", (e) => {
      const r = e.target.getBoundingClientRect();
      blob = [((e.clientX - r.left) / r.width) * GRID, ((e.clientY - r.top) / r.height) * GRID];
      renderGam();
    });
  }
  $("gam-seed").addEventListener("input", renderGam);
  renderGam();
}

init().then(() => {
  $("status").textContent = "";
  setupLoss();
  setupAug();
  setupGam();
}).catch((err) => {
  $("status").textContent = `Failed to load the module: ${err}. Build it with wasm-pack (see README).`;
});
