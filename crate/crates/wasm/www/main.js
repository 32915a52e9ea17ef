import init, { welfareCurve, epsilonMixCurve, trimmedWeights } from "./pkg/fwi_wasm.js";

const $ = (id) => document.getElementById(id);
const numbers = (text) => new Float64Array(text.split(",").map((x) => Number(x.trim())));

function readInstance() {
  return {
    values: numbers($("values").value),
    prior: numbers($("prior").value),
    mechanism: Number($("mechanism").value),
    lambda: Number($("lambda").value),
  };
}

function rows(flat, width) {
  const out = [];
  for (let i = 0; i < flat.length; i += width) out.push(Array.from(flat.slice(i, i + width)));
  return out;
}

// Draws series of [x, y] points on a canvas with x in [0, 1].
function plot(canvas, series, { yMax, rightMax } = {}) {
  const ctx = canvas.getContext("2d");
  const pad = 36;
  const w = canvas.width - 2 * pad;
  const h = canvas.height - 2 * pad;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad, w, h);
  ctx.fillStyle = "#444";
  ctx.font = "12px sans-serif";
  const top = yMax || Math.max(1e-12, ...series.filter((s) => !s.right).flatMap((s) => s.points.map((p) => p[1])));
  for (const t of [0, 0.5, 1]) {
    ctx.fillText(t.toFixed(1), pad + t * w - 8, pad + h + 16);
    ctx.fillText((t * top).toPrecision(3), 2, pad + h - t * h + 4);
    if (rightMax) ctx.fillText((t * rightMax).toFixed(2), pad + w + 4, pad + h - t * h + 4);
  }
  for (const s of series) {
    const scale = s.right ? rightMax : top;
    ctx.strokeStyle = s.color;
    ctx.setLineDash(s.dashed ? [4, 4] : []);
    ctx.beginPath();
    s.points.forEach(([x, y], i) => {
      const px = pad + x * w;
      const py = pad + h - (y / scale) * h;
      i ? ctx.lineTo(px, py) : ctx.moveTo(px, py);
    });
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

function guarded(fn) {
  return () => {
    $("instance-error").textContent = "";
    try {
      fn();
    } catch (e) {
      $("instance-error").textContent = e.message || String(e);
    }
  };
}

function plotExact() {
  const { values, prior, mechanism, lambda } = readInstance();
  const data = rows(welfareCurve(values, prior, mechanism, lambda, 41), 4);
  plot($("exact"), [
    { color: "#1f77b4", points: data.map((r) => [r[0], r[1]]) },
    { color: "#2ca02c", points: data.map((r) => [r[0], r[2]]) },
    { color: "#d62728", dashed: true, points: data.map((r) => [r[0], r[3]]) },
  ]);
}

function plotEmix() {
  const { values, prior, mechanism } = readInstance();
  const data = rows(
    epsilonMixCurve(values, prior, mechanism, Number($("epsilon").value), Number($("runs").value), Number($("seed").value), 20),
    3,
  );
  plot(
    $("emix"),
    [
      { color: "#1f77b4", points: data.map((r) => [r[0], r[1]]) },
      { color: "#ff7f0e", right: true, points: data.map((r) => [r[0], r[2]]) },
      { color: "#999", right: true, dashed: true, points: [[0, 0], [1, 1]] },
    ],
    { rightMax: 1 },
  );
}

function plotTrim() {
  const s = Number($("samples").value);
  const alpha = Number($("trim-alpha").value);
  const weights = trimmedWeights(s, alpha);
  $("trim-label").textContent = `alpha = ${alpha.toFixed(2)}, kept mass ${(s * (1 - alpha)).toFixed(2)} of ${s}`;
  const canvas = $("trim");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const bar = canvas.width / weights.length;
  weights.forEach((wt, i) => {
    ctx.fillStyle = wt === 1 ? "#1f77b4" : "#9ecae1";
    const height = wt * (canvas.height - 20);
    ctx.fillRect(i * bar + 1, canvas.height - height, Math.max(1, bar - 2), height);
  });
}

await init();
$("plot-exact").addEventListener("click", guarded(plotExact));
$("plot-emix").addEventListener("click", guarded(plotEmix));
$("samples").addEventListener("input", guarded(plotTrim));
$("trim-alpha").addEventListener("input", guarded(plotTrim));
guarded(plotExact)();
guarded(plotTrim)();
