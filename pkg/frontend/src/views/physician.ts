// Physician workstation: alert inbox, patient history with charts,
// prescription entry, and the knowledge-base editor.

import type { ApiClient } from "../api.js";
import { ApiError } from "../api.js";
import { chartSvg } from "../chart.js";
import { kindTitle, recordsFound, timestamp } from "../format.js";
import type { Store } from "../state.js";
import {
  VITAL_KINDS,
  type KbInterval,
  type KbPayload,
  type PatientDetail,
  type VitalKindLabel,
} from "../types.js";
import { mountAlertLists } from "./alerts.js";

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function detailHtml(detail: PatientDetail): string {
  const p = detail.patient;
  const list = (entries: { text: string; created_at_s: number }[]) =>
    entries.length
      ? `<ul>${entries.map((e) => `<li>${escapeHtml(e.text)}</li>`).join("")}</ul>`
      : `<p class="empty">none recorded</p>`;
  const prescriptions = detail.prescriptions.length
    ? `<ul>${detail.prescriptions
        .map(
          (rx) =>
            `<li>${escapeHtml(rx.text)} <small>reg. ${escapeHtml(rx.physician_registration_number)}</small></li>`,
        )
        .join("")}</ul>`
    : `<p class="empty">none recorded</p>`;
  const notes = detail.notes.length
    ? `<ul>${detail.notes.map((n) => `<li>${escapeHtml(n.text)}</li>`).join("")}</ul>`
    : `<p class="empty">none</p>`;
  return `
    <h3>${p.last_name}, ${p.first_name} <small>#${p.id}</small></h3>
    <p class="caption">biomedical data last updated: ${timestamp(detail.last_update_ms)}</p>
    <div class="detail-tabs">
      <section><h4>Details</h4>
        <dl>
          <dt>Address</dt><dd>${escapeHtml(p.address)}</dd>
          <dt>Mobile</dt><dd>${escapeHtml(p.mobile_phone)}</dd>
          <dt>Date of birth</dt><dd>${p.date_of_birth}</dd>
          <dt>Social insurance</dt><dd>${escapeHtml(p.social_insurance_number)}</dd>
        </dl>
      </section>
      <section><h4>Medical Conditions</h4>${list(detail.conditions)}</section>
      <section><h4>Medications</h4>${prescriptions}${list(detail.medications)}</section>
      <section><h4>Medical History</h4>${list(detail.history)}</section>
      <section><h4>Notes</h4>${notes}</section>
    </div>`;
}

export function mountPhysicianView(
  root: HTMLElement,
  store: Store,
  api: ApiClient,
  user: string,
): () => void {
  root.innerHTML = `
    <section class="panel">
      <h2>Alert inbox</h2>
      <div id="phys-alerts"></div>
    </section>
    <section class="panel">
      <h2>Patient record</h2>
      <form id="load-form">
        <input id="load-id" placeholder="patient ID" inputmode="numeric" size="8">
        <button type="submit">Load</button>
        <span id="load-caption" class="caption"></span>
      </form>
      <div id="detail"></div>
      <div class="chart-controls">
        <label>chart:
          <select id="chart-kind">
            ${VITAL_KINDS.map((k) => `<option value="${k}">${kindTitle(k)}</option>`).join("")}
          </select>
        </label>
      </div>
      <div id="chart"></div>
      <form id="rx-form">
        <h4>Prescribe</h4>
        <input id="rx-reg" placeholder="physician registration number">
        <input id="rx-text" placeholder="prescription" size="40">
        <button type="submit">Submit</button>
        <span id="rx-status" class="caption"></span>
      </form>
    </section>
    <section class="panel">
      <h2>Knowledge base</h2>
      <div id="kb-editor"></div>
    </section>`;

  const unsubAlerts = mountAlertLists(
    root.querySelector<HTMLElement>("#phys-alerts")!,
    store,
    api,
    user,
  );

  const detailBox = root.querySelector<HTMLElement>("#detail")!;
  const chartBox = root.querySelector<HTMLElement>("#chart")!;
  const kindSelect = root.querySelector<HTMLSelectElement>("#chart-kind")!;
  const loadCaption = root.querySelector<HTMLElement>("#load-caption")!;
  const rxStatus = root.querySelector<HTMLElement>("#rx-status")!;
  let currentId: number | null = null;
  let kb: KbPayload | null = null;

  const renderChart = () => {
    if (currentId === null) {
      chartBox.innerHTML = "";
      return;
    }
    const kind = kindSelect.value as VitalKindLabel;
    api.getReadings(currentId, { kind }).then(({ readings }) => {
      const intervals: KbInterval[] = kb?.tables[kind] ?? [];
      chartBox.innerHTML = chartSvg(readings, intervals);
    });
  };

  const loadPatient = (id: number) => {
    api
      .getDetail(id)
      .then((detail) => {
        currentId = id;
        loadCaption.textContent = recordsFound(1);
        detailBox.innerHTML = detailHtml(detail);
        renderChart();
      })
      .catch((err: unknown) => {
        loadCaption.textContent =
          err instanceof ApiError && err.status === 404
            ? recordsFound(0)
            : "load failed";
      });
  };

  root.querySelector<HTMLFormElement>("#load-form")!.addEventListener(
    "submit",
    (event) => {
      event.preventDefault();
      const raw = root.querySelector<HTMLInputElement>("#load-id")!.value.trim();
      if (raw) loadPatient(Number(raw));
    },
  );
  kindSelect.addEventListener("change", renderChart);

  root.querySelector<HTMLFormElement>("#rx-form")!.addEventListener(
    "submit",
    (event) => {
      event.preventDefault();
      if (currentId === null) {
        rxStatus.textContent = "load a patient first";
        return;
      }
      const reg = root.querySelector<HTMLInputElement>("#rx-reg")!.value;
      const text = root.querySelector<HTMLInputElement>("#rx-text")!.value;
      api
        .addPrescription(currentId, reg, text)
        .then(() => {
          rxStatus.textContent = "prescribed";
          root.querySelector<HTMLInputElement>("#rx-text")!.value = "";
          loadPatient(currentId!); // §"immediately visible": re-render detail
        })
        .catch((err: unknown) => {
          rxStatus.textContent =
            err instanceof ApiError ? err.message : "request failed";
        });
    },
  );

  const kbBox = root.querySelector<HTMLElement>("#kb-editor")!;
  const renderKbEditor = (payload: KbPayload, errors: string[] = []) => {
    kb = payload;
    const tableRows = (kind: string, intervals: KbInterval[]) =>
      intervals
        .map(
          (iv, index) => `
          <tr data-kind="${kind}" data-index="${index}">
            <td><input class="kb-lower" value="${iv.lower ?? ""}" size="8" placeholder="-inf"></td>
            <td><input class="kb-upper" value="${iv.upper ?? ""}" size="8" placeholder="+inf"></td>
            <td><select class="kb-band">
              ${["normal", "warning", "critical"]
                .map(
                  (b) =>
                    `<option value="${b}" ${b === iv.band ? "selected" : ""}>${b}</option>`,
                )
                .join("")}
            </select></td>
          </tr>`,
        )
        .join("");
    kbBox.innerHTML = `
      <p class="caption">revision ${payload.revision} by ${escapeHtml(payload.author)} at ${escapeHtml(payload.updated_at)}</p>
      ${errors.length ? `<ul class="kb-errors">${errors.map((e) => `<li>${escapeHtml(e)}</li>`).join("")}</ul>` : ""}
      <form id="kb-form">
        ${Object.entries(payload.tables)
          .map(
            ([kind, intervals]) => `
            <fieldset>
              <legend>${kindTitle(kind as VitalKindLabel)}</legend>
              <table class="kb-table" data-kind="${kind}">
                <thead><tr><th>from (incl.)</th><th>to (excl.)</th><th>band</th></tr></thead>
                <tbody>${tableRows(kind, intervals)}</tbody>
              </table>
            </fieldset>`,
          )
          .join("")}
        <button type="submit">Save revision</button>
        <span id="kb-status" class="caption"></span>
      </form>`;
    kbBox
      .querySelector<HTMLFormElement>("#kb-form")!
      .addEventListener("submit", (event) => {
        event.preventDefault();
        const edited: KbPayload = {
          ...payload,
          author: user,
          tables: {},
        };
        kbBox.querySelectorAll<HTMLTableElement>(".kb-table").forEach((table) => {
          const kind = table.dataset.kind!;
          const intervals: KbInterval[] = [];
          table.querySelectorAll("tbody tr").forEach((row) => {
            const lower = row.querySelector<HTMLInputElement>(".kb-lower")!.value.trim();
            const upper = row.querySelector<HTMLInputElement>(".kb-upper")!.value.trim();
            const band = row.querySelector<HTMLSelectElement>(".kb-band")!.value;
            intervals.push({
              lower: lower === "" ? null : Number(lower),
              upper: upper === "" ? null : Number(upper),
              band: band as KbInterval["band"],
            });
          });
          edited.tables[kind] = intervals;
        });
        api
          .putKb(edited)
          .then((updated) => renderKbEditor(updated, []))
          .catch((err: unknown) => {
            if (err instanceof ApiError) {
              // no client-side correction: show the server's verdict verbatim
              renderKbEditor(payloadWithEdits(payload, edited), err.errors);
            }
          });
      });
  };

  const payloadWithEdits = (base: KbPayload, edited: KbPayload): KbPayload => ({
    ...base,
    tables: edited.tables,
  });

  api.getKb().then((payload) => renderKbEditor(payload));

  return () => {
    unsubAlerts();
  };
}
