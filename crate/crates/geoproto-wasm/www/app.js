import init, { cluster_scatter, gap_profile, experience_table } from "./pkg/geoproto_wasm.js";

const PALETTE = [
  "#4363d8", "#e6194b", "#3cb44b", "#f58231",
  "#911eb4", "#46f0f0", "#f032e6", "#9a6324",
];

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

let lastScatter = null;

function status(message) {
  $("status").textContent = message || "";
}

function generatorParams() {
  return { seed: num("seed"), clusters: num("clusters"), records: num("records") };
}

function call(fn, params) {
  status("");
  try {
    return JSON.parse(fn(JSON.stringify(params)));
  } catch (err) {
    status(String(err));
    return null;
  }
}

function drawScatter() {
  if (!lastScatter) return;
  const doc = lastScatter;
  const canvas = $("scatter");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);

  const plane = $("plane").value;
  const colorBy = $("color-by").value;
  const xs = doc.points.map((p) => (plane === "map" ? p.lon : p.x));
  const ys = doc.points.map((p) => (plane === "map" ? p.lat : p.y));
  const pad = 0.05;
  const span = (values) => {
    const lo = Math.min(...values);
    const hi = Math.max(...values);
    const margin = (hi - lo || 1) * pad;
    return [lo - margin, hi + margin];
  };
  const [x0, x1] = span(xs);
  const [y0, y1] = span(ys);
  const sx = (v) => ((v - x0) / (x1 - x0)) * canvas.width;
  const sy = (v) => canvas.height - ((v - y0) / (y1 - y0)) * canvas.height;

  doc.points.forEach((p, i) => {
    const label = colorBy === "truth" ? p.truth : p.cluster;
    ctx.fillStyle = PALETTE[label % PALETTE.length];
    ctx.beginPath();
    ctx.arc(sx(xs[i]), sy(ys[i]), 2.4, 0, 2 * Math.PI);
    ctx.fill();
  });
}

$("run-scatter").addEventListener("click", () => {
  const doc = call(cluster_scatter, { ...generatorParams(), k: num("fit-k") });
  if (!doc) return;
  lastScatter = doc;
  const w = doc.weights;
  $("scatter-stats").textContent =
    `ARI ${doc.adjusted_rand_index.toFixed(3)} | ` +
    `lambda1 ${w.lambda1.toPrecision(3)}, lambda2 ${w.lambda2.toPrecision(3)} | ` +
    `${doc.iterations} iterations${doc.converged ? "" : " (not converged)"} | ` +
    `sizes [${doc.sizes.join(", ")}] | ` +
    `cost ${doc.cost.total.toFixed(1)} = num ${doc.cost.numerical.toFixed(1)}` +
    ` + cat ${doc.cost.categorical.toFixed(1)} + geo ${doc.cost.spatial.toFixed(1)}`;
  drawScatter();
});
$("plane").addEventListener("change", drawScatter);
$("color-by").addEventListener("change", drawScatter);

$("run-gap").addEventListener("click", () => {
  const doc = call(gap_profile, {
    ...generatorParams(),
    k_max: num("k-max"),
    replicates: num("replicates"),
    sample_fraction: num("fraction"),
  });
  if (!doc) return;
  $("gap-stats").textContent =
    (doc.chosen_k == null
      ? "no k satisfied the selection rule"
      : `chosen k = ${doc.chosen_k}`) +
    ` | subsample ${doc.subsample_size} | B = ${doc.replicates}`;
  drawGap(doc);
});

function drawGap(doc) {
  const canvas = $("gap");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const rows = doc.rows.filter((r) => r.gap != null);
  if (rows.length === 0) {
    status("gap profile is empty; see diagnostics in the console");
    console.log(doc.diagnostics);
    return;
  }

  const margin = { left: 50, right: 20, top: 15, bottom: 30 };
  const width = canvas.width - margin.left - margin.right;
  const height = canvas.height - margin.top - margin.bottom;
  const gaps = rows.map((r) => r.gap);
  const bands = rows.map((r) => r.s ?? 0);
  const lo = Math.min(...rows.map((r, i) => gaps[i] - bands[i]));
  const hi = Math.max(...rows.map((r, i) => gaps[i] + bands[i]));
  const ks = rows.map((r) => r.k);
  const kMin = Math.min(...ks);
  const kMax = Math.max(...ks);
  const sx = (k) => margin.left + ((k - kMin) / (kMax - kMin || 1)) * width;
  const sy = (g) => margin.top + (1 - (g - lo) / (hi - lo || 1)) * height;

  ctx.strokeStyle = "#888";
  ctx.strokeRect(margin.left, margin.top, width, height);
  ctx.fillStyle = "#222";
  ctx.font = "12px system-ui";
  ctx.fillText(hi.toFixed(3), 4, sy(hi) + 4);
  ctx.fillText(lo.toFixed(3), 4, sy(lo) + 4);

  ctx.strokeStyle = "#4363d8";
  ctx.beginPath();
  rows.forEach((r, i) => (i === 0 ? ctx.moveTo(sx(r.k), sy(r.gap)) : ctx.lineTo(sx(r.k), sy(r.gap))));
  ctx.stroke();

  rows.forEach((r) => {
    const x = sx(r.k);
    if (r.s != null) {
      ctx.strokeStyle = "#999";
      ctx.beginPath();
      ctx.moveTo(x, sy(r.gap - r.s));
      ctx.lineTo(x, sy(r.gap + r.s));
      ctx.stroke();
    }
    ctx.fillStyle = r.k === doc.chosen_k ? "#e6194b" : "#4363d8";
    ctx.beginPath();
    ctx.arc(x, sy(r.gap), r.k === doc.chosen_k ? 6 : 3.5, 0, 2 * Math.PI);
    ctx.fill();
    ctx.fillStyle = "#222";
    ctx.fillText(String(r.k), x - 3, canvas.height - 10);
  });
}

$("run-experience").addEventListener("click", () => {
  const doc = call(experience_table, { ...generatorParams(), k: num("exp-k") });
  if (!doc) return;
  const report = doc.report;
  const fmt = (v, digits = 3) => (v == null ? "" : Number(v).toFixed(digits));
  const interval = (row, idx) => {
    const ci = row.intervals[idx];
    return ci ? `[${fmt(ci.lower)}, ${fmt(ci.upper)}]` : "";
  };
  const flagged = (row) => {
    const ci95 = row.intervals[1];
    return ci95 && ci95.excludes_null;
  };
  const line = (row) => `
    <tr>
      <td>${row.cluster == null ? "portfolio" : row.cluster}</td>
      <td>${row.records}</td>
      <td>${fmt(row.actual_claims, 0)}</td>
      <td>${fmt(row.expected_claims, 1)}</td>
      <td>${fmt(row.ratio)}</td>
      <td>${fmt(row.std_error)}</td>
      <td>${interval(row, 0)}</td>
      <td>${interval(row, 1)}</td>
      <td>${flagged(row) ? '<span class="flag">deviates</span>' : ""}</td>
    </tr>`;
  $("experience").innerHTML = `
    <table>
      <thead>
        <tr>
          <th>cluster</th><th>records</th><th>actual</th><th>expected</th>
          <th>A/E</th><th>std err</th><th>90% CI</th><th>95% CI</th><th></th>
        </tr>
      </thead>
      <tbody>
        ${report.clusters.map(line).join("")}
        ${line(report.portfolio)}
      </tbody>
    </table>`;
});

await init();
status("");
