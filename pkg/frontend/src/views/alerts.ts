// Alert triage cards shared by both role views. The Ack button posts to the
// server and the card moves lists when the server's alert_acked event (or
// the ack response itself) lands in the store.

import type { ApiClient } from "../api.js";
import { alertAge, bandColor, formatValue, kindTitle } from "../format.js";
import type { Store } from "../state.js";
import { alertsByState } from "../state.js";
import type { Alert } from "../types.js";

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function card(alert: Alert, nowS: number, ackable: boolean): string {
  const age = alertAge(alert.raised_at_s, nowS);
  const ackInfo =
    alert.state === "acked" && alert.acked_by
      ? `<span class="ack-info">acked by ${escapeHtml(alert.acked_by)}</span>`
      : "";
  const clearedInfo = alert.cleared_unacked
    ? `<span class="cleared-unacked">cleared unacked</span>`
    : "";
  const escalation = alert.renotify_count
    ? `<span class="escalations">renotified ${alert.renotify_count}x${alert.escalation_exhausted ? " (exhausted)" : ""}</span>`
    : "";
  const button =
    ackable && alert.state === "open"
      ? `<button class="ack-button" data-alert-id="${alert.alert_id}">Ack</button>`
      : "";
  return `
    <div class="alert-card ${alert.state}" data-card-id="${alert.alert_id}"
         style="border-left-color:${bandColor(alert.band)}">
      <div class="alert-head">
        <span class="alert-band" style="color:${bandColor(alert.band)}">${alert.band.toUpperCase()}</span>
        <span class="alert-title">patient ${alert.patient_id} &middot; ${kindTitle(alert.kind)}</span>
        <span class="alert-age">${age} ago</span>
      </div>
      <div class="alert-body">
        ${formatValue(alert.kind, alert.value)} (${alert.reason})
        ${ackInfo} ${clearedInfo} ${escalation}
      </div>
      ${button}
    </div>`;
}

export function mountAlertLists(
  container: HTMLElement,
  store: Store,
  api: ApiClient,
  user: string,
): () => void {
  container.innerHTML = `
    <div class="alert-columns">
      <section><h3>Open</h3><div data-list="open"></div></section>
      <section><h3>Acknowledged</h3><div data-list="acked"></div></section>
      <section><h3>Closed</h3><div data-list="closed"></div></section>
    </div>`;
  const lists = {
    open: container.querySelector<HTMLElement>('[data-list="open"]')!,
    acked: container.querySelector<HTMLElement>('[data-list="acked"]')!,
    closed: container.querySelector<HTMLElement>('[data-list="closed"]')!,
  };

  container.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (!target.classList.contains("ack-button")) return;
    const alertId = Number(target.dataset.alertId);
    target.setAttribute("disabled", "true");
    api
      .ackAlert(alertId, user)
      .then((alert) => {
        // server confirmation; the stream event carries the same payload
        store.dispatch({ type: "alert_acked", alert });
      })
      .catch(() => target.removeAttribute("disabled"));
  });

  const render = () => {
    const nowS = Date.now() / 1000;
    const grouped = alertsByState(store.get());
    lists.open.innerHTML =
      grouped.open.map((a) => card(a, nowS, true)).join("") ||
      `<p class="empty">no open alerts</p>`;
    lists.acked.innerHTML =
      grouped.acked.map((a) => card(a, nowS, false)).join("") ||
      `<p class="empty">none</p>`;
    lists.closed.innerHTML =
      grouped.closed.slice(0, 10).map((a) => card(a, nowS, false)).join("") ||
      `<p class="empty">none</p>`;
  };
  render();
  return store.subscribe(render);
}
