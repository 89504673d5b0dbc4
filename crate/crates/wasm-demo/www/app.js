import init, { Demo, advantages } from "./pkg/veason_wasm.js";

const $ = (id) => document.getElementById(id);

await init();
const demo = new Demo(7n, 40);
const W = demo.width(), H = demo.height();
let boxes = [];
let drag = null;

for (let i = 0; i < demo.len(); i++) {
  const o = document.createElement("option");
  o.value = i;
  o.textContent = `${demo.sample_id(i)} (${demo.subset(i)})`;
  $("sample").append(o);
}

const sample = () => Number($("sample").value);
const frame = () => Number($("frameIdx").value);

function draw() {
  const i = sample(), k = frame();
  const ctx = $("frame").getContext("2d");
  const px = demo.frame_rgba(i, k);
  if ($("showGt").checked) {
    const m = demo.gt_mask(i, k);
    for (let p = 0; p < m.length; p++) {
      if (m[p]) { px[4 * p] = 255; px[4 * p + 1] = (px[4 * p + 1] >> 1); px[4 * p + 2] = (px[4 * p + 2] >> 1); }
    }
  }
  ctx.putImageData(new ImageData(new Uint8ClampedArray(px), W, H), 0, 0);
  ctx.lineWidth = 0.5;
  ctx.strokeStyle = "#000";
  const all = drag ? [...boxes, drag] : boxes;
  for (const [x1, y1, x2, y2] of all) ctx.strokeRect(x1, y1, x2 - x1, y2 - y1);
  $("frameTime").textContent = `t = ${demo.sampled_times(i)[k]}s`;
  $("expression").textContent = `"${demo.expression(i)}"`;
}

function cell(ev) {
  const r = $("frame").getBoundingClientRect();
  const x = Math.round(((ev.clientX - r.left) / r.width) * W);
  const y = Math.round(((ev.clientY - r.top) / r.height) * H);
  return [Math.max(0, Math.min(W, x)), Math.max(0, Math.min(H, y))];
}

$("frame").addEventListener("mousedown", (ev) => {
  const [x, y] = cell(ev);
  drag = [x, y, x, y];
});
window.addEventListener("mousemove", (ev) => {
  if (!drag) return;
  const [x, y] = cell(ev);
  drag[2] = x; drag[3] = y;
  draw();
});
window.addEventListener("mouseup", () => {
  if (!drag) return;
  const [a, b, c, d] = drag;
  drag = null;
  if (a !== c && b !== d) boxes.push([Math.min(a, c), Math.min(b, d), Math.max(a, c), Math.max(b, d)]);
  draw();
});

function score(text) {
  try {
    $("scoreOut").textContent = JSON.stringify(JSON.parse(demo.score_text(sample(), text)), null, 1);
  } catch (e) {
    $("scoreOut").textContent = String(e);
  }
}

$("scoreBoxes").onclick = () => {
  const text = demo.response_for(sample(), frame(), new Float64Array(boxes.flat()));
  $("responseText").value = text;
  score(text);
};
$("scoreText").onclick = () => score($("responseText").value);
$("clearBoxes").onclick = () => { boxes = []; draw(); };
$("sample").onchange = () => {
  boxes = [];
  $("frameIdx").max = demo.num_frames(sample()) - 1;
  draw();
};
$("frameIdx").oninput = draw;
$("showGt").onchange = draw;

function plot(values) {
  const c = $("curve"), ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  if (!values.length) return;
  const lo = Math.min(...values), hi = Math.max(...values);
  const y = (v) => (hi > lo ? c.height - 10 - ((v - lo) / (hi - lo)) * (c.height - 20) : c.height / 2);
  ctx.beginPath();
  values.forEach((v, i) => {
    const x = 5 + (i / Math.max(1, values.length - 1)) * (c.width - 10);
    i ? ctx.lineTo(x, y(v)) : ctx.moveTo(x, y(v));
  });
  ctx.strokeStyle = "#1f77b4";
  ctx.stroke();
  ctx.fillText(`max ${hi.toFixed(3)}`, 8, 12);
  ctx.fillText(`min ${lo.toFixed(3)}`, 8, c.height - 2);
}

$("train").onclick = () => {
  const t0 = performance.now();
  try {
    const curve = demo.train(Number($("steps").value), Number($("lr").value));
    plot(Array.from(curve));
    const kl = demo.kl_curve();
    const n = Math.min(30, curve.length);
    const mean = (a) => a.reduce((s, v) => s + v, 0) / a.length;
    $("trainOut").textContent =
      `mean reward, first ${n} steps: ${mean(curve.slice(0, n)).toFixed(3)}\n` +
      `mean reward, last ${n} steps:  ${mean(curve.slice(-n)).toFixed(3)}\n` +
      `final KL to reference: ${kl[kl.length - 1].toExponential(2)}\n` +
      `${((performance.now() - t0) / 1000).toFixed(2)}s`;
  } catch (e) {
    $("trainOut").textContent = String(e);
  }
};
$("policyAnswer").onclick = () => {
  const text = demo.policy_response(sample());
  $("responseText").value = text;
  score(text);
};

$("adv").onclick = () => {
  const r = $("rewards").value.split(/[\s,]+/).filter(Boolean).map(Number);
  try {
    const a = advantages(new Float64Array(r), 1e-6);
    $("advOut").textContent = r.map((v, i) => `${v}\t-> ${a[i].toFixed(4)}`).join("\n");
  } catch (e) {
    $("advOut").textContent = String(e);
  }
};

$("sample").onchange();
