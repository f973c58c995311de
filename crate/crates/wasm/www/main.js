import init, { kappaCurve, violationCurve, hardViolation, reconstruct, zipfCounts } from "./pkg/gptt_audit_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function axes(ctx, w, h, pad, xs, ys, label) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#222";
  ctx.font = "12px sans-serif";
  ctx.fillText(label, pad, pad - 8);
  ctx.fillText(xs[0].toPrecision(3), pad, h - pad + 14);
  ctx.fillText(xs[1].toPrecision(3), w - pad - 30, h - pad + 14);
  ctx.fillText(ys[1].toPrecision(4), 2, pad + 4);
  ctx.fillText(ys[0].toPrecision(4), 2, h - pad);
}

function plotLine(canvas, xs, ys, label, color, extra) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 40;
  const all = extra ? ys.concat(extra.ys) : ys;
  const x0 = Math.min(...xs), x1 = Math.max(...xs);
  let y0 = Math.min(...all), y1 = Math.max(...all);
  if (y0 === y1) { y0 -= 1; y1 += 1; }
  axes(ctx, w, h, pad, [x0, x1], [y0, y1], label);
  const px = (x) => pad + (x - x0) / (x1 - x0) * (w - 2 * pad);
  const py = (y) => h - pad - (y - y0) / (y1 - y0) * (h - 2 * pad);
  const draw = (ys, color) => {
    ctx.strokeStyle = color;
    ctx.beginPath();
    xs.forEach((x, i) => (i ? ctx.lineTo(px(x), py(ys[i])) : ctx.moveTo(px(x), py(ys[i]))));
    ctx.stroke();
  };
  draw(ys, color);
  if (extra) draw(extra.ys, extra.color);
}

function runViolation() {
  const e1 = num("vc-e1"), e2 = num("vc-e2"), tmax = num("vc-tmax");
  $("vc-msg").textContent = "";
  try {
    const n = 401;
    const ks = kappaCurve(e2, -10, 10, n);
    const zs = Array.from({ length: n }, (_, i) => -10 + 20 * i / (n - 1));
    plotLine($("vc-kappa"), zs, Array.from(ks), "kappa(z)", "#1565c0", { ys: zs.map(() => 1), color: "#aaa" });

    const ts = [];
    for (let t = 1; t <= tmax; t = t < 8 ? t + 1 : Math.ceil(t * 1.25)) ts.push(t);
    const lr = Array.from(violationCurve(e1, e2, Uint32Array.from(ts)));
    plotLine($("vc-curve"), ts, lr, "ln V - ln V' against t (grey: 2 eps1)", "#c62828",
      { ys: ts.map(() => 2 * e1), color: "#aaa" });
    const first = ts.find((t, i) => lr[i] > 2 * e1);
    $("vc-msg").textContent = first ? `log-ratio first exceeds 2ε₁ at t = ${first}` : "";
  } catch (e) {
    $("vc-msg").innerHTML = `<span class="err">${e}</span>`;
  }
}

function runHard() {
  const out = $("hv-out");
  try {
    const [pd, pdp, fd, fdp] = hardViolation(num("hv-e1"), num("hv-n"), num("hv-seed"));
    out.innerHTML = "<tr><th></th><th>exact</th><th>simulated</th></tr>" +
      `<tr><th>P[(bot, top) | D]</th><td>${pd.toFixed(6)}</td><td>${fd.toFixed(6)}</td></tr>` +
      `<tr><th>P[(bot, top) | D']</th><td>${pdp}</td><td>${fdp}</td></tr>`;
  } catch (e) {
    out.innerHTML = `<tr><td class="err">${e}</td></tr>`;
  }
}

function runReconstruction() {
  const msg = $("rc-msg");
  try {
    const counts = zipfCounts(num("rc-domain"), num("rc-total"), 1.0, num("rc-seed"));
    const r = reconstruct(counts, num("rc-eps"), num("rc-delta"), 0.5, num("rc-seed"));
    const guesses = r.guesses, blocks = r.blocks;
    msg.textContent = `${r.blockCount} blocks, noisy threshold ${r.noisyThreshold.toFixed(3)}, ` +
      `exact-match accuracy ${(100 * r.accuracy).toFixed(1)}%`;

    const canvas = $("rc-plot"), ctx = canvas.getContext("2d");
    const { width: w, height: h } = canvas;
    const pad = 30, n = counts.length;
    const order = Array.from(counts.keys()).sort((a, b) => counts[a] - counts[b]);
    const top = Math.max(1, ...counts, ...guesses);
    const bw = (w - 2 * pad) / n;
    ctx.clearRect(0, 0, w, h);
    order.forEach((u, i) => {
      const x = pad + i * bw;
      const hTrue = counts[u] / top * (h - 2 * pad);
      ctx.fillStyle = blocks[u] % 2 ? "#90caf9" : "#c5e1a5";
      ctx.fillRect(x, h - pad - hTrue, Math.max(bw - 1, 1), hTrue);
      ctx.fillStyle = guesses[u] === counts[u] ? "#2e7d32" : "#c62828";
      ctx.fillRect(x, h - pad - guesses[u] / top * (h - 2 * pad) - 1, Math.max(bw - 1, 1), 2);
    });
    ctx.fillStyle = "#222";
    ctx.font = "12px sans-serif";
    ctx.fillText("cells sorted by true count; bars = truth (shade alternates by block), ticks = guess", pad, 14);
    r.free();
  } catch (e) {
    msg.innerHTML = `<span class="err">${e}</span>`;
  }
}

await init();
$("vc-run").onclick = runViolation;
$("hv-run").onclick = runHard;
$("rc-run").onclick = runReconstruction;
runViolation();
runHard();
runReconstruction();
