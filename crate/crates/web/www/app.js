import init, { crossValidation, bootstrap, importance } from "./pkg/tdp_risk_web.js";

const $ = (id) => document.getElementById(id);
const canvas = $("chart");
const ctx = canvas.getContext("2d");

function controls() {
  const num = (id) => Number($(id).value);
  return { separation: num("separation"), noise: num("noise"), seed: Math.max(0, Math.floor(num("seed"))) };
}

function clear() {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.font = "12px system-ui, sans-serif";
}

// Vertical bars; values in [0, max]. `marks` are extra vertical lines at bar-axis positions in [0, 1].
function bars(labels, values, { max, color, marks = [] }) {
  clear();
  const left = 50, bottom = canvas.height - 60, top = 20, width = canvas.width - left - 20;
  const step = width / values.length;
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  ctx.moveTo(left, top);
  ctx.lineTo(left, bottom);
  ctx.lineTo(left + width, bottom);
  ctx.stroke();
  ctx.fillStyle = "#444";
  ctx.textAlign = "right";
  ctx.fillText(String(max), left - 6, top + 4);
  ctx.fillText("0", left - 6, bottom + 4);
  values.forEach((v, i) => {
    const h = max > 0 ? (Math.max(v, 0) / max) * (bottom - top) : 0;
    ctx.fillStyle = color;
    ctx.fillRect(left + i * step + 2, bottom - h, step - 4, h);
    ctx.save();
    ctx.fillStyle = "#444";
    ctx.translate(left + (i + 0.5) * step, bottom + 8);
    ctx.rotate(-Math.PI / 4);
    ctx.textAlign = "right";
    ctx.fillText(labels[i], 0, 0);
    ctx.restore();
  });
  for (const { at, color: c, text } of marks) {
    const x = left + at * width;
    ctx.strokeStyle = c;
    ctx.setLineDash([5, 4]);
    ctx.beginPath();
    ctx.moveTo(x, top);
    ctx.lineTo(x, bottom);
    ctx.stroke();
    ctx.setLineDash([]);
    ctx.fillStyle = c;
    ctx.textAlign = "center";
    ctx.fillText(text, x, top - 6);
  }
}

const pct = (x) => (100 * x).toFixed(1) + "%";

function showCv(r) {
  $("summary").textContent =
    `${r.observations} observations. Mean accuracy ${pct(r.mean_accuracy)}; ` +
    `same protocol with shuffled labels ${pct(r.null_mean_accuracy)}. Fold sizes ${r.fold_sizes.join(", ")}.`;
  bars(r.per_fold_accuracy.map((_, i) => `fold ${i + 1}`), r.per_fold_accuracy, {
    max: 1, color: "#4a7ab8",
  });
}

function showBootstrap(r) {
  $("summary").textContent =
    `${r.replicates} replicates (${r.skipped} skipped). ${Math.round(100 * r.level)}% interval ` +
    `[${pct(r.ci_low)}, ${pct(r.ci_high)}]; cross-validation accuracy ${pct(r.cv_mean_accuracy)}.`;
  const n = r.histogram.length;
  const labels = r.histogram.map((_, i) => (i / n).toFixed(2));
  bars(labels, r.histogram, {
    max: Math.max(...r.histogram), color: "#6aa56a",
    marks: [
      { at: r.ci_low, color: "#b05030", text: "low" },
      { at: r.ci_high, color: "#b05030", text: "high" },
      { at: r.cv_mean_accuracy, color: "#333", text: "cv" },
    ],
  });
}

function showImportance(r) {
  $("summary").textContent =
    `Baseline accuracy ${pct(r.baseline_accuracy)}.` + (r.note ? ` ${r.note}` : "");
  const values = r.entries.map((e) => (r.note ? e.raw : e.normalized ?? 0));
  bars(r.entries.map((e) => e.feature), values, {
    max: r.note ? Math.max(1e-9, ...values) : 1, color: "#c08a30",
  });
}

function run(label, op, show) {
  $("status").className = "";
  $("status").textContent = `${label}...`;
  // Yield so the status line paints before the synchronous computation.
  setTimeout(() => {
    const t0 = performance.now();
    try {
      show(JSON.parse(op()));
      $("status").textContent = `${label} done in ${((performance.now() - t0) / 1000).toFixed(2)} s`;
    } catch (e) {
      $("status").className = "error";
      $("status").textContent = String(e.message ?? e);
    }
  }, 0);
}

await init();

$("run-cv").onclick = () => {
  const c = controls();
  run("Cross-validation", () => crossValidation(c.separation, c.noise, c.seed), showCv);
};
$("run-boot").onclick = () => {
  const c = controls();
  const reps = Math.max(1, Math.floor(Number($("replicates").value)));
  run("Bootstrap", () => bootstrap(c.separation, c.noise, c.seed, reps), showBootstrap);
};
$("run-imp").onclick = () => {
  const c = controls();
  const reps = Math.max(1, Math.floor(Number($("repeats").value)));
  run("Importance", () => importance(c.separation, c.noise, c.seed, reps), showImportance);
};
$("run-cv").click();
