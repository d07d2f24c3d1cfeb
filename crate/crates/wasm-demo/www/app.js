import init, { network, placement, phasing, vsi_ranking } from "./pkg/pmu_wasm.js";

const $ = (id) => document.getElementById(id);
const canvas = $("grid");
const ctx = canvas.getContext("2d");
let net = null;
let pos = new Map();

function status(text, isError = false) {
  $("status").textContent = text;
  $("status").className = isError ? "error" : "";
}

// deterministic force-directed layout
function layout(n) {
  let seed = 7;
  const rand = () => ((seed = (seed * 1103515245 + 12345) % 2147483648) / 2147483648);
  const p = new Map(n.buses.map((b, i) => {
    const a = (2 * Math.PI * i) / n.buses.length;
    return [b.id, { x: Math.cos(a) + 0.1 * rand(), y: Math.sin(a) + 0.1 * rand() }];
  }));
  const k = 1 / Math.sqrt(n.buses.length);
  for (let it = 0; it < 300; it++) {
    const t = 0.1 * (1 - it / 300);
    const d = new Map(n.buses.map((b) => [b.id, { x: 0, y: 0 }]));
    for (const a of n.buses) {
      for (const b of n.buses) {
        if (a.id >= b.id) continue;
        const pa = p.get(a.id), pb = p.get(b.id);
        const dx = pa.x - pb.x, dy = pa.y - pb.y;
        const dist = Math.max(Math.hypot(dx, dy), 1e-3);
        const f = (k * k) / dist;
        d.get(a.id).x += (dx / dist) * f; d.get(a.id).y += (dy / dist) * f;
        d.get(b.id).x -= (dx / dist) * f; d.get(b.id).y -= (dy / dist) * f;
      }
    }
    for (const [f, to] of n.branches) {
      const pa = p.get(f), pb = p.get(to);
      const dx = pa.x - pb.x, dy = pa.y - pb.y;
      const dist = Math.max(Math.hypot(dx, dy), 1e-3);
      const g = (dist * dist) / k;
      d.get(f).x -= (dx / dist) * g; d.get(f).y -= (dy / dist) * g;
      d.get(to).x += (dx / dist) * g; d.get(to).y += (dy / dist) * g;
    }
    for (const b of n.buses) {
      const v = d.get(b.id), q = p.get(b.id);
      const len = Math.max(Math.hypot(v.x, v.y), 1e-9);
      q.x += (v.x / len) * Math.min(len, t);
      q.y += (v.y / len) * Math.min(len, t);
    }
  }
  const xs = [...p.values()].map((q) => q.x), ys = [...p.values()].map((q) => q.y);
  const [x0, x1, y0, y1] = [Math.min(...xs), Math.max(...xs), Math.min(...ys), Math.max(...ys)];
  const pad = 30;
  for (const q of p.values()) {
    q.x = pad + ((q.x - x0) / (x1 - x0 || 1)) * (canvas.width - 2 * pad);
    q.y = pad + ((q.y - y0) / (y1 - y0 || 1)) * (canvas.height - 2 * pad);
  }
  return p;
}

// pmus, observed: sets of bus ids; lines: set of "f-t" keys to emphasize
function draw({ pmus = new Set(), observed = null, lines = new Set() } = {}) {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  for (const [f, t] of net.branches) {
    const a = pos.get(f), b = pos.get(t);
    const hot = lines.has(`${f}-${t}`);
    ctx.strokeStyle = hot ? "#e80" : "#999";
    ctx.lineWidth = hot ? 3 : 1;
    ctx.beginPath(); ctx.moveTo(a.x, a.y); ctx.lineTo(b.x, b.y); ctx.stroke();
  }
  const r = net.buses.length > 50 ? 6 : 10;
  for (const bus of net.buses) {
    const q = pos.get(bus.id);
    ctx.beginPath(); ctx.arc(q.x, q.y, r, 0, 2 * Math.PI);
    ctx.fillStyle = pmus.has(bus.id) ? "#d33" : observed === null ? "#ddd" : observed.has(bus.id) ? "#5a5" : "#bbb";
    ctx.fill();
    ctx.lineWidth = 2;
    ctx.strokeStyle = bus.zib ? "#36c" : "#555";
    ctx.stroke();
    if (r >= 10) {
      ctx.fillStyle = "#000"; ctx.font = "11px sans-serif"; ctx.textAlign = "center";
      ctx.fillText(bus.id, q.x, q.y - r - 3);
    }
  }
}

function table(headers, rows) {
  const head = `<tr>${headers.map((h) => `<th>${h}</th>`).join("")}</tr>`;
  const body = rows.map((r) => `<tr>${r.map((c) => `<td>${c}</td>`).join("")}</tr>`).join("");
  $("result").innerHTML = `<table>${head}${body}</table>`;
}

function loadCase() {
  net = JSON.parse(network($("case").value));
  pos = layout(net);
  draw();
  $("result").innerHTML = "";
  status(`${net.buses.length} buses, ${net.branches.length} lines, ${net.buses.filter((b) => b.zib).length} zero-injection buses`);
}

function run(label, fn) {
  status(`${label}...`);
  // let the status paint before the solver blocks the thread
  setTimeout(() => {
    try {
      const t = performance.now();
      fn();
      status(`${$("status").textContent.replace(/\.\.\.$/, "")} (${Math.round(performance.now() - t)} ms)`);
    } catch (e) {
      status(String(e.message || e), true);
    }
  }, 20);
}

function onPlace() {
  run("Solving", () => {
    const r = JSON.parse(placement($("case").value, $("scenario").value));
    draw({ pmus: new Set(r.locations), observed: new Set(r.observed) });
    table(["PMUs", "locations", "redundancy", "proven optimal"],
      [[r.count, r.locations.join(", "), r.redundancy, r.proven_optimal ? "yes" : "no (budget hit)"]]);
    status("Placement found");
  });
}

function onPhase() {
  run("Planning", () => {
    const stages = JSON.parse(phasing($("case").value, $("budgets").value, $("zib").checked));
    const pmus = new Set(stages.flatMap((s) => s.new_buses));
    draw({ pmus });
    let total = 0;
    table(["stage", "new PMUs", "cumulative PMUs", "observed", "observed %"],
      stages.map((s, i) => [i + 1, s.new_buses.join(", "), (total += s.new_buses.length), s.observed, s.percent.toFixed(2)]));
    status("Stages planned");
  });
}

function onRank() {
  run("Sweeping load buses", () => {
    const rows = JSON.parse(vsi_ranking($("case").value, parseFloat($("step").value)));
    const top = rows.slice(0, 5);
    draw({ pmus: new Set(), lines: new Set(top.map((r) => `${r.line[0]}-${r.line[1]}`)) });
    table(["rank", "load bus", "q_max (pu)", "VSI at limit", "critical line"],
      rows.map((r, i) => [i + 1, r.bus, r.q_max.toFixed(4), r.vsi.toFixed(4), `${r.line[0]}-${r.line[1]}`]));
    status("Ranking done; critical lines of the five weakest buses highlighted");
  });
}

await init();
$("case").addEventListener("change", loadCase);
$("place").addEventListener("click", onPlace);
$("phase").addEventListener("click", onPhase);
$("rank").addEventListener("click", onRank);
loadCase();
