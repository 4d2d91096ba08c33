/** DOM wiring for the dictionary-lookup page. Logic lives in session.ts. */

import { ApiClient } from "./api.js";
import { QuerySession } from "./session.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function renderMessage(text: string | null, kind: "error" | "ok" = "error"): void {
  const box = el<HTMLDivElement>("message");
  box.textContent = text ?? "";
  box.className = text ? `message ${kind}` : "message";
}

function renderResults(session: QuerySession): void {
  const tbody = el<HTMLTableSectionElement>("results");
  tbody.replaceChildren();
  for (const row of session.lastRows ?? []) {
    const tr = document.createElement("tr");
    const bar = `<div class="bar" style="width:${row.barPercent}%"></div>`;
    tr.innerHTML =
      `<td>${row.rank}</td><td>${row.label}</td>` +
      `<td class="prob">${row.probabilityText}${bar}</td>`;
    tbody.appendChild(tr);
  }
}

function renderLabels(session: QuerySession, prefix: string): void {
  const list = el<HTMLUListElement>("labels");
  list.replaceChildren();
  const matches = session.browseLabels(prefix);
  if (matches.length === 0) {
    const item = document.createElement("li");
    item.textContent = prefix ? `no labels match “${prefix}”` : "no labels";
    item.className = "empty";
    list.appendChild(item);
    return;
  }
  for (const label of matches) {
    const item = document.createElement("li");
    item.textContent = label;
    list.appendChild(item);
  }
}

async function readFile(input: HTMLInputElement): Promise<[string, string] | null> {
  const file = input.files?.[0];
  if (!file) {
    return null;
  }
  return [file.name, await file.text()];
}

export async function start(): Promise<void> {
  const baseUrl =
    new URLSearchParams(window.location.search).get("service") ?? "http://127.0.0.1:8000";
  const client = new ApiClient(baseUrl);
  const session = new QuerySession(client);

  const retry = el<HTMLButtonElement>("retry");
  const connect = async () => {
    try {
      const info = await client.info();
      el<HTMLSpanElement>("status").textContent =
        `${info.count} signs · ${info.similarity} · ${baseUrl}`;
      await session.refreshLabels();
      renderLabels(session, el<HTMLInputElement>("filter").value);
      retry.hidden = true;
      renderMessage(null);
    } catch {
      el<HTMLSpanElement>("status").textContent = "service unreachable";
      retry.hidden = false;
      renderMessage(`cannot reach ${baseUrl}; is the service running?`);
    }
  };
  retry.addEventListener("click", connect);

  el<HTMLInputElement>("query-file").addEventListener("change", async (event) => {
    const loaded = await readFile(event.target as HTMLInputElement);
    if (loaded && session.loadDocument(loaded[0], loaded[1])) {
      renderMessage(`loaded ${loaded[0]}`, "ok");
    } else if (loaded) {
      renderMessage(session.error);
    }
  });

  el<HTMLButtonElement>("submit").addEventListener("click", async () => {
    session.k = Number(el<HTMLInputElement>("k").value) || 5;
    const temp = el<HTMLInputElement>("temperature").value;
    session.temperature = temp === "" ? null : Number(temp);
    const rows = await session.submitQuery();
    if (rows === null) {
      renderMessage(session.error);
    } else {
      renderMessage(null);
      renderResults(session);
    }
  });

  el<HTMLInputElement>("filter").addEventListener("input", (event) => {
    renderLabels(session, (event.target as HTMLInputElement).value);
  });

  el<HTMLButtonElement>("add").addEventListener("click", async () => {
    const label = el<HTMLInputElement>("new-label").value;
    const loaded = await readFile(el<HTMLInputElement>("add-file"));
    if (!loaded) {
      renderMessage("choose a poseseq file for the new sign");
      return;
    }
    if (!session.loadDocument(loaded[0], loaded[1]) || session.document === null) {
      renderMessage(session.error);
      return;
    }
    const outcome = await session.addSign(label, session.document);
    if (outcome.kind === "added") {
      renderMessage(`added “${label}” (${outcome.count} signs)`, "ok");
      renderLabels(session, el<HTMLInputElement>("filter").value);
    } else {
      renderMessage(outcome.message);
    }
  });

  await connect();
}

start();
