import init, { fragment_synthetic, lr_curve, train_demo } from "./pkg/fragvqa_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function blit(canvas, rgba, w, h, scale = 1) {
  canvas.width = w * scale;
  canvas.height = h * scale;
  const ctx = canvas.getContext("2d");
  const img = new ImageData(new Uint8ClampedArray(rgba), w, h);
  if (scale === 1) {
    ctx.putImageData(img, 0, 0);
    return ctx;
  }
  const tmp = new OffscreenCanvas(w, h);
  tmp.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(tmp, 0, 0, w * scale, h * scale);
  return ctx;
}

function drawFragments() {
  const w = num("f-width"), h = num("f-height");
  const patch = num("f-patch"), size = num("f-size");
  let v;
  try {
    v = fragment_synthetic(num("f-seed"), num("f-shapes"), num("f-speed"), num("f-noise"),
      w, h, num("f-frame"), patch, size);
  } catch (e) {
    $("frag-info").innerHTML = `<span class="err">${e}</span>`;
    return;
  }
  const ctx = blit($("c-frame"), v.frame(), w, h);
  const coords = v.coords();
  ctx.strokeStyle = "rgba(255, 40, 40, 0.9)";
  const seen = new Set();
  for (let k = 0; k < coords.length; k += 2) {
    const key = coords[k] * 100000 + coords[k + 1];
    if (seen.has(key)) continue;
    seen.add(key);
    ctx.strokeRect(coords[k + 1] * patch + 0.5, coords[k] * patch + 0.5, patch - 1, patch - 1);
  }
  blit($("c-residual"), v.residual(), w, h);
  const scale = size < 150 ? 2 : 1;
  blit($("c-resized"), v.resized(), size, size, scale);
  blit($("c-frag-residual"), v.frag_residual(), size, size, scale);
  blit($("c-frag-frame"), v.frag_frame(), size, size, scale);
  const t = coords.length / 2;
  const grid = `${Math.floor(h / patch)}×${Math.floor(w / patch)}`;
  $("frag-info").textContent = `T = ${t} patches of ${patch}px from a ${grid} grid (${seen.size} distinct)`;
  v.free();
}

function axes(ctx, w, h, pad) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(pad, pad);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad, h - pad);
  ctx.stroke();
}

function polyline(ctx, xs, ys, box, color) {
  const [x0, x1, y0, y1, w, h, pad] = box;
  ctx.strokeStyle = color;
  ctx.beginPath();
  xs.forEach((x, i) => {
    const px = pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
    const py = h - pad - ((ys[i] - y0) / (y1 - y0 || 1)) * (h - 2 * pad);
    i ? ctx.lineTo(px, py) : ctx.moveTo(px, py);
  });
  ctx.stroke();
}

function drawLr() {
  const lr0 = num("l-lr0"), epochs = num("l-epochs"), swa = num("l-swa");
  $("l-swa-v").textContent = swa.toFixed(2);
  const lr = lr_curve(lr0, epochs, swa);
  const c = $("c-lr"), ctx = c.getContext("2d"), pad = 30;
  axes(ctx, c.width, c.height, pad);
  const xs = Array.from(lr, (_, i) => i);
  polyline(ctx, xs, Array.from(lr), [0, Math.max(epochs - 1, 1), 0, lr0, c.width, c.height, pad], "#1565c0");
  ctx.fillStyle = "#555";
  ctx.fillText(`lr0 = ${lr0}`, pad + 4, pad - 8);
  ctx.fillText(`epoch ${epochs - 1}`, c.width - pad - 50, c.height - 10);
}

function runTraining() {
  $("train-info").textContent = "training…";
  setTimeout(() => {
    let run;
    try {
      run = JSON.parse(train_demo(num("t-videos"), num("t-epochs"), num("t-seed")));
    } catch (e) {
      $("train-info").innerHTML = `<span class="err">${e}</span>`;
      return;
    }
    const c = $("c-loss"), ctx = c.getContext("2d"), pad = 25;
    axes(ctx, c.width, c.height, pad);
    const ep = run.epochs.map((e) => e[0]);
    const loss = run.epochs.map((e) => e[2]);
    const rmse = run.epochs.map((e) => e[3]);
    const top = Math.max(...loss, ...rmse);
    const box = [0, Math.max(ep.length - 1, 1), 0, top, c.width, c.height, pad];
    polyline(ctx, ep, loss, box, "#000");
    polyline(ctx, ep, rmse, box, "#c62828");

    const s = $("c-scatter"), sc = s.getContext("2d");
    axes(sc, s.width, s.height, pad);
    const vals = run.points.flatMap((p) => [p[0], p[1]]);
    const lo = Math.min(...vals), hi = Math.max(...vals);
    const map = (v, len) => pad + ((v - lo) / (hi - lo || 1)) * (len - 2 * pad);
    sc.strokeStyle = "#ccc";
    sc.beginPath();
    sc.moveTo(map(lo, s.width), s.height - map(lo, s.height));
    sc.lineTo(map(hi, s.width), s.height - map(hi, s.height));
    sc.stroke();
    for (const [y, p, val] of run.points) {
      sc.fillStyle = val ? "#c62828" : "#555";
      sc.fillRect(map(y, s.width) - 2, s.height - map(p, s.height) - 2, 4, 4);
    }
    $("train-info").textContent =
      `feature dim ${run.dim}; kept ${run.selected}; validation SRCC ${run.val_srcc.toFixed(3)}, PLCC ${run.val_plcc.toFixed(3)}`;
  }, 10);
}

await init();
$("status").textContent = "ready";
for (const el of document.querySelectorAll("#frag-controls input, #frag-controls select")) {
  el.addEventListener("input", drawFragments);
}
for (const id of ["l-lr0", "l-epochs", "l-swa"]) $(id).addEventListener("input", drawLr);
$("t-run").addEventListener("click", runTraining);
drawFragments();
drawLr();
