import init, { galleryNames, galleryChannel, classify, decompose, region } from "./pkg/iokraus_demo.js";

const $ = (id) => document.getElementById(id);

function show(target, fn) {
  try {
    target.textContent = fn();
    target.classList.remove("error");
  } catch (e) {
    target.textContent = String(e.message ?? e);
    target.classList.add("error");
  }
}

function drawPlane(canvas, pts, i, j, initial) {
  const ctx = canvas.getContext("2d");
  const s = canvas.width / 2 - 10;
  const cx = canvas.width / 2;
  const cy = canvas.height / 2;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.arc(cx, cy, s, 0, 2 * Math.PI);
  ctx.moveTo(cx - s, cy);
  ctx.lineTo(cx + s, cy);
  ctx.moveTo(cx, cy - s);
  ctx.lineTo(cx, cy + s);
  ctx.stroke();
  ctx.fillStyle = "rgba(30, 90, 200, 0.25)";
  for (let p = 0; p < pts.length; p += 3) {
    ctx.fillRect(cx + s * pts[p + i] - 0.5, cy - s * pts[p + j] - 0.5, 1, 1);
  }
  ctx.fillStyle = "#d03000";
  ctx.beginPath();
  ctx.arc(cx + s * initial[i], cy - s * initial[j], 4, 0, 2 * Math.PI);
  ctx.fill();
}

function sample() {
  const initial = ["x", "y", "z"].map((k) => Number($(k).value));
  const seed = Number($("seed").value);
  const count = Number($("count").value);
  const status = $("status");
  show(status, () => {
    const t0 = performance.now();
    const pts = region(initial[0], initial[1], initial[2], seed, count);
    drawPlane($("xz"), pts, 0, 2, initial);
    drawPlane($("xy"), pts, 0, 1, initial);
    return `${pts.length / 3} points in ${(performance.now() - t0).toFixed(0)} ms`;
  });
}

await init();

const select = $("gallery");
for (const name of JSON.parse(galleryNames())) {
  select.add(new Option(name, name));
}
select.value = "eq14";
const load = () => {
  $("channel").value = galleryChannel(select.value);
  $("result").textContent = "";
};
select.addEventListener("change", load);
load();

$("classify").addEventListener("click", () => show($("result"), () => classify($("channel").value)));
$("decompose").addEventListener("click", () => show($("result"), () => decompose($("channel").value)));
$("sample").addEventListener("click", sample);
sample();
