import init, { scan, evolve, raster } from "./pkg/lif_meanfield_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function model() {
  return [num("h"), num("vr"), num("sigma0"), num("J")];
}

function message(id, text, isError = false) {
  const el = $(id);
  el.textContent = text;
  el.className = isError ? "error" : "note";
}

// Axes with optional log scale on x; returns a mapping from data to pixels.
function frame(canvas, xs, ys, opts = {}) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 40;
  ctx.clearRect(0, 0, w, h);
  const fx = opts.logx ? Math.log10 : (x) => x;
  const finite = (a) => a.filter(Number.isFinite);
  const xv = finite(xs.map(fx));
  const yv = finite(ys);
  const x0 = Math.min(...xv), x1 = Math.max(...xv);
  const y0 = opts.ymin ?? Math.min(0, ...yv);
  const y1 = opts.ymax ?? (Math.max(...yv) || 1);
  const px = (x) => pad + ((fx(x) - x0) / (x1 - x0 || 1)) * (w - 1.5 * pad);
  const py = (y) => h - pad + ((y0 - y) / (y1 - y0 || 1)) * (h - 1.5 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad / 2, w - 1.5 * pad, h - 1.5 * pad);
  ctx.fillStyle = "#333";
  ctx.font = "11px system-ui";
  const fmt = (v) => (Math.abs(v) >= 1e3 || (Math.abs(v) < 1e-2 && v !== 0) ? v.toExponential(1) : v.toFixed(2));
  ctx.fillText(fmt(opts.logx ? 10 ** x0 : x0), pad, h - pad + 14);
  ctx.fillText(fmt(opts.logx ? 10 ** x1 : x1), w - pad, h - pad + 14);
  ctx.fillText(fmt(y1), 2, pad / 2 + 10);
  ctx.fillText(fmt(y0), 2, h - pad);
  if (opts.title) ctx.fillText(opts.title, pad + 4, pad / 2 + 12);
  return { ctx, px, py };
}

function line(f, xs, ys, color) {
  const { ctx, px, py } = f;
  ctx.strokeStyle = color;
  ctx.beginPath();
  let started = false;
  xs.forEach((x, i) => {
    const y = ys[i];
    if (!Number.isFinite(y)) { started = false; return; }
    if (started) ctx.lineTo(px(x), py(y));
    else { ctx.moveTo(px(x), py(y)); started = true; }
  });
  ctx.stroke();
}

function showRegime(r) {
  const flags = ["global_wellposed", "blowup_all_data", "exists_one_ss", "exists_two_ss", "unique_stable_ss"]
    .filter((k) => r[k]);
  const text = flags.length ? flags.join(", ") : "no regime condition holds";
  message("regime", `regime: ${text}${r.warnings.length ? " (" + r.warnings.join("; ") + ")" : ""}`);
}

function runScan() {
  try {
    const out = JSON.parse(scan(...model(), num("points")));
    showRegime(out.regime);
    const g = out.G.map((v) => Math.max(v, -0.05));
    const f = frame($("fg"), out.sigma, out.F.concat(g), { logx: true, ymin: -0.05, ymax: 1, title: "F (blue), G (red) against sigma" });
    line(f, out.sigma, out.F, "#1f5fbf");
    line(f, out.sigma, g, "#c0392b");
    f.ctx.fillStyle = "#000";
    for (const r of out.roots) f.ctx.fillRect(f.px(r) - 3, f.py((1 - num("sigma0") / r) / num("J")) - 3, 6, 6);
    const roots = out.roots.map((r) => r.toPrecision(6));
    message("scan-msg", roots.length ? `steady rates: ${roots.join(", ")}` : "no steady state in range");
    const d = out.density;
    const c = $("density");
    if (d) {
      const fd = frame(c, d.v, d.p, { title: `steady density at sigma = ${d.sigma.toPrecision(6)}` });
      line(fd, d.v, d.p, "#1f5fbf");
    } else {
      c.getContext("2d").clearRect(0, 0, c.width, c.height);
    }
  } catch (e) {
    message("scan-msg", String(e.message ?? e), true);
  }
}

let generation = 0;

function runEvolve() {
  const run = ++generation;
  try {
    const out = JSON.parse(evolve(...model(), num("mean"), num("sd"), num("tend"), 60));
    const peak = Math.max(...out.frames.flat().filter(Number.isFinite));
    const rates = frame($("rate"), out.t, out.sigma, { title: "firing rate sigma(t)" });
    line(rates, out.t, out.sigma, "#c0392b");
    const b = out.blow_up;
    message("evolve-msg", b.blown_up
      ? `blow-up at t = ${b.t_blow.toPrecision(4)}, last finite rate ${b.sigma_at_stop.toPrecision(4)}`
      : `final rate ${b.sigma_at_stop.toPrecision(6)}`);
    let k = 0;
    const step = () => {
      const f = frame($("pde"), out.v, out.frames[k], { ymax: peak, title: `density at t = ${out.t[k].toFixed(3)}` });
      line(f, out.v, out.frames[k], "#1f5fbf");
      k += 1;
      if (k < out.frames.length) setTimeout(() => run === generation && requestAnimationFrame(step), 80);
    };
    step();
  } catch (e) {
    message("evolve-msg", String(e.message ?? e), true);
  }
}

function runRaster() {
  try {
    const n = num("N"), horizon = num("horizon");
    const out = JSON.parse(raster(...model(), n, horizon, num("seed")));
    const canvas = $("spikes");
    const ctx = canvas.getContext("2d");
    const w = canvas.width, h = canvas.height, pad = 20;
    ctx.clearRect(0, 0, w, h);
    ctx.strokeStyle = "#999";
    ctx.strokeRect(pad, pad / 2, w - 2 * pad, h - 1.5 * pad);
    const big = Math.max(2, n / 10);
    out.t.forEach((t, i) => {
      const size = out.cascade_sizes[out.cascade[i]];
      ctx.fillStyle = size >= big ? "#c0392b" : "#1f5fbf";
      const x = pad + (t / horizon) * (w - 2 * pad);
      const y = pad / 2 + (out.neuron[i] / n) * (h - 1.5 * pad);
      ctx.fillRect(x, y, 1.5, Math.max(1, (h - 1.5 * pad) / n));
    });
    message("raster-msg",
      `${out.t.length} spikes, mean rate ${out.mean_rate.toPrecision(4)} per neuron, largest cascade ${out.max_cascade} (red: cascades of ${Math.ceil(big)}+)`);
  } catch (e) {
    message("raster-msg", String(e.message ?? e), true);
  }
}

await init();
$("scan").addEventListener("click", runScan);
$("evolve").addEventListener("click", runEvolve);
$("raster").addEventListener("click", runRaster);
runScan();
