import init, { Demo, sampleText, categories } from "./pkg/histoscope_wasm_demo.js";

const $ = (id) => document.getElementById(id);
let demo = null;

function status(text, error = false) {
  $("status").textContent = text;
  $("status").className = error ? "error" : "";
}

function guard(fn) {
  return () => {
    try {
      fn();
    } catch (e) {
      status(String(e.message ?? e), true);
    }
  };
}

function renderHistograms(hits = new Set()) {
  const list = JSON.parse(demo.histograms($("sort").value));
  const root = $("histograms");
  root.replaceChildren();
  for (const h of list) {
    const max = Math.max(...h.buckets.map((b) => b.count));
    const box = document.createElement("div");
    box.className = "hist" + (h.source === "USER" ? " user" : "") + (hits.has(h.id) ? " hit" : "");
    box.id = "h-" + h.id;
    const title = document.createElement("h3");
    title.textContent = h.label + " ";
    const meta = document.createElement("small");
    meta.textContent = `total ${h.total_count}, entropy ${h.entropy.toFixed(3)}`;
    title.append(meta);
    box.append(title);
    for (const b of h.buckets) {
      const row = document.createElement("div");
      row.className = "row";
      const name = document.createElement("span");
      name.textContent = b.surface.join(" ");
      name.title = name.textContent;
      const bar = document.createElement("span");
      bar.className = "bar";
      bar.style.width = `${(12 * b.count) / max}rem`;
      const count = document.createElement("span");
      count.textContent = b.count;
      row.append(name, bar, count);
      box.append(row);
    }
    root.append(box);
  }
}

function analyze() {
  const started = performance.now();
  demo?.free();
  demo = null;
  demo = new Demo($("text").value, Number($("cutoff").value));
  const s = JSON.parse(demo.summary());
  status(`${s.examples} examples, ${s.entities} entities, ${s.histograms} histograms (${Math.round(performance.now() - started)} ms)`);
  $("results").replaceChildren();
  renderHistograms();
}

function search() {
  if (!demo) return;
  const results = JSON.parse(demo.search($("query").value, $("semantic").checked));
  const ul = $("results");
  ul.replaceChildren();
  for (const r of results) {
    const li = document.createElement("li");
    li.textContent = `${r.label} (${r.match_kind.toLowerCase()}, ${r.score.toFixed(3)})`;
    ul.append(li);
  }
  if (!results.length) ul.innerHTML = "<li>no matches</li>";
  renderHistograms(new Set(results.map((r) => r.histogram_id)));
}

function create() {
  if (!demo) return;
  const r = JSON.parse(demo.addCategory($("category").value || $("category").placeholder));
  const out = $("created");
  if (!r.histogram) {
    out.textContent = r.candidates.length
      ? `no dataset entity is close to: ${r.candidates.join(", ")}`
      : `the offline generator knows no examples of "${r.category}"`;
    return;
  }
  const picked = r.suggestions.map((s) => `${s.surface.join(" ")} ${s.similarity.toFixed(2)}`);
  out.textContent = `examples: ${r.candidates.join(", ")}. kept: ${picked.join(", ")}`;
  renderHistograms(new Set([r.histogram.id]));
  $("h-" + r.histogram.id)?.scrollIntoView({ behavior: "smooth" });
}

await init();
$("text").value = sampleText();
for (const c of JSON.parse(categories())) {
  const option = document.createElement("option");
  option.value = c;
  $("categories").append(option);
}
$("cutoff").oninput = () => ($("cutoff-value").value = $("cutoff").value);
$("analyze").onclick = guard(analyze);
$("sort").onchange = guard(() => demo && renderHistograms());
$("search").onclick = guard(search);
$("query").onkeydown = (e) => e.key === "Enter" && guard(search)();
$("create").onclick = guard(create);
guard(analyze)();
