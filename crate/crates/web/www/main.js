import init, { segmentImage, spreadingEvent, devilsStaircase } from "./pkg/torus_spread_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

// Maps the square [cx - half, cx + half] x [cy - half, cy + half] onto a canvas, y up.
function view(canvas, cx, cy, half) {
  const ctx = canvas.getContext("2d");
  const s = canvas.width / (2 * half);
  const tx = (x) => (x - cx + half) * s;
  const ty = (y) => (cy + half - y) * s;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  return { ctx, tx, ty, s };
}

function status(id, text, dense) {
  const el = $(id);
  el.textContent = text;
  el.className = "status" + (dense === undefined ? "" : dense ? " dense" : " not-dense");
}

function drawSegment() {
  try {
    const n = num("seg-n");
    const r = JSON.parse(segmentImage(n, num("seg-q"), num("seg-m"), num("seg-tol")));
    const { ctx, tx, ty } = view($("seg-canvas"), 0, 0, n + 1);
    ctx.strokeStyle = "#888";
    ctx.strokeRect(tx(-n), ty(n), tx(n) - tx(-n), ty(-n) - ty(n));
    ctx.strokeStyle = "#1d4e89";
    ctx.lineWidth = 0.7;
    ctx.beginPath();
    const p = r.points;
    let pen = false;
    for (let i = 0; i < p.length; i += 2) {
      // Lift the pen where the curve leaves the visible window.
      const inside = Math.abs(p[i]) <= n + 1 && Math.abs(p[i + 1]) <= n + 1;
      if (inside && pen) ctx.lineTo(tx(p[i]), ty(p[i + 1]));
      else if (inside) ctx.moveTo(tx(p[i]), ty(p[i + 1]));
      pen = inside;
    }
    ctx.stroke();
    const d = r.density;
    status("seg-status",
      `m=${r.params.m} q=${r.params.q} δ=${r.delta.toExponential(3)} vertices=${r.vertices}\n` +
      `${d.verdict} at ε=${d.eps} (max gap ${d.max_gap?.toFixed(3)})`, d.verdict === "certified-dense");
  } catch (e) {
    status("seg-status", String(e), false);
  }
}

function drawSpread() {
  status("spr-status", "searching…");
  // Let the status repaint before the search blocks the thread.
  setTimeout(() => {
    try {
      const direct = $("spr-mode").value === "direct";
      const r = JSON.parse(spreadingEvent(num("spr-n"), num("spr-q"), 0, num("spr-x"), num("spr-y"), direct));
      const c = r.certificate;
      const t = c.target_ball;
      const { ctx, tx, ty, s } = view($("spr-canvas"), t.center[0], t.center[1], 1.5 * t.radius);
      ctx.fillStyle = "#1d4e89";
      const p = r.points;
      for (let i = 0; i < p.length; i += 2) ctx.fillRect(tx(p[i]) - 0.5, ty(p[i + 1]) - 0.5, 1, 1);
      ctx.strokeStyle = "#d62828";
      ctx.beginPath();
      ctx.arc(tx(t.center[0]), ty(t.center[1]), t.radius * s, 0, 2 * Math.PI);
      ctx.stroke();
      status("spr-status",
        `k=${c.k} (${c.mode}${c.predicted ? ", predicted centre" : ""})\n` +
        `target (${t.center[0]}, ${t.center[1]}) radius ${t.radius}\n` +
        `${c.verdict} at ε=${c.eps}`, c.verdict === "certified-dense");
    } catch (e) {
      status("spr-status", String(e), false);
    }
  }, 0);
}

function drawStaircase() {
  const eps = num("stair-eps");
  $("stair-eps-value").textContent = eps.toFixed(2);
  try {
    const ys = devilsStaircase(eps, num("stair-samples"), 2000);
    const canvas = $("stair-canvas");
    const { ctx, tx, ty } = view(canvas, 0.5, 0.5, 0.52);
    ctx.strokeStyle = "#888";
    ctx.strokeRect(tx(0), ty(1), tx(1) - tx(0), ty(0) - ty(1));
    ctx.strokeStyle = "#1d4e89";
    ctx.beginPath();
    ys.forEach((y, i) => {
      const x = i / (ys.length - 1);
      if (i === 0) ctx.moveTo(tx(x), ty(y)); else ctx.lineTo(tx(x), ty(y));
    });
    ctx.stroke();
    status("stair-status", `rotation number vs ω for x ↦ x + ω + (${eps.toFixed(2)}/2π)·sin 2πx\n2000 iterations per ω, error ≤ 5e-4`);
  } catch (e) {
    status("stair-status", String(e), false);
  }
}

await init();
$("seg-run").addEventListener("click", drawSegment);
$("spr-run").addEventListener("click", drawSpread);
$("stair-eps").addEventListener("input", drawStaircase);
$("stair-samples").addEventListener("change", drawStaircase);
drawSegment();
drawStaircase();
