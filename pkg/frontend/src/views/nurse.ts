// Nurse workstation: live vitals grid, patient search, alert triage.

import type { ApiClient } from "../api.js";
import {
  bandColor,
  formatValue,
  kindTitle,
  recordsFound,
  timestamp,
} from "../format.js";
import type { Store } from "../state.js";
import { VITAL_KINDS, type Patient } from "../types.js";
import { mountAlertLists } from "./alerts.js";

function tileHtml(store: Store, patient: Patient): string {
  const tiles = store.get().tiles[patient.id] ?? {};
  const cells = VITAL_KINDS.map((kind) => {
    const tile = tiles[kind];
    if (!tile) {
      return `<div class="tile missing"><span class="tile-kind">${kindTitle(kind)}</span><span class="tile-value">&mdash;</span></div>`;
    }
    return `
      <div class="tile" style="background:${bandColor(tile.band)}">
        <span class="tile-kind">${kindTitle(kind)}</span>
        <span class="tile-value">${formatValue(kind, tile.value)}</span>
        <span class="tile-ts">${timestamp(tile.timestampMs)}</span>
      </div>`;
  }).join("");
  return `
    <div class="patient-card">
      <h4>${patient.last_name}, ${patient.first_name} <small>#${patient.id}</small></h4>
      <div class="tile-row">${cells}</div>
    </div>`;
}

export function mountNurseView(
  root: HTMLElement,
  store: Store,
  api: ApiClient,
  user: string,
): () => void {
  root.innerHTML = `
    <section class="panel">
      <h2>Patient search</h2>
      <form id="search-form">
        <input id="search-name" placeholder="name" autocomplete="off">
        <input id="search-id" placeholder="ID" inputmode="numeric" size="6">
        <button type="submit">Find</button>
        <button type="button" id="search-clear">All</button>
      </form>
      <div id="search-results"></div>
      <p id="search-caption" class="caption"></p>
    </section>
    <section class="panel">
      <h2>Live vitals</h2>
      <div id="vitals-grid"></div>
    </section>
    <section class="panel">
      <h2>Alerts</h2>
      <div id="nurse-alerts"></div>
    </section>`;

  const nameInput = root.querySelector<HTMLInputElement>("#search-name")!;
  const idInput = root.querySelector<HTMLInputElement>("#search-id")!;
  const results = root.querySelector<HTMLElement>("#search-results")!;
  const caption = root.querySelector<HTMLElement>("#search-caption")!;
  const grid = root.querySelector<HTMLElement>("#vitals-grid")!;

  const renderResults = (patients: Patient[], count: number) => {
    caption.textContent = recordsFound(count);
    results.innerHTML = `
      <table class="patients">
        <thead><tr>
          <th>Last name</th><th>First name</th><th>Address</th>
          <th>Mobile</th><th>Date of birth</th><th>ID</th>
        </tr></thead>
        <tbody>${patients
          .map(
            (p) => `<tr>
              <td>${p.last_name}</td><td>${p.first_name}</td>
              <td>${p.address}</td><td>${p.mobile_phone}</td>
              <td>${p.date_of_birth}</td><td>${p.id}</td></tr>`,
          )
          .join("")}</tbody>
      </table>`;
  };

  const search = () => {
    const name = nameInput.value.trim() || undefined;
    const id = idInput.value.trim() ? Number(idInput.value.trim()) : undefined;
    api.searchPatients(name, id).then((list) => {
      store.set({ patients: list.patients, searchCount: list.count });
      renderResults(list.patients, list.count);
    });
  };

  root.querySelector<HTMLFormElement>("#search-form")!.addEventListener(
    "submit",
    (event) => {
      event.preventDefault();
      search();
    },
  );
  root.querySelector<HTMLElement>("#search-clear")!.addEventListener("click", () => {
    nameInput.value = "";
    idInput.value = "";
    search();
  });

  const renderGrid = () => {
    const patients = store.get().patients;
    grid.innerHTML = patients.length
      ? patients.map((p) => tileHtml(store, p)).join("")
      : `<p class="empty">no patients loaded</p>`;
  };

  const unsubGrid = store.subscribe(renderGrid);
  const unsubAlerts = mountAlertLists(
    root.querySelector<HTMLElement>("#nurse-alerts")!,
    store,
    api,
    user,
  );

  search(); // initial load: everyone
  renderGrid();
  return () => {
    unsubGrid();
    unsubAlerts();
  };
}
