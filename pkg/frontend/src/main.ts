// Dashboard entry point: role toggle, status banner, stream wiring.
// The role selector is a login-less toggle that only changes the X-Role
// header (authentication is out of scope); the two views stay visibly
// distinct.

import { ApiClient } from "./api.js";
import { markStale, Store } from "./state.js";
import { EventStream } from "./stream.js";
import type { Role } from "./types.js";
import { mountNurseView } from "./views/nurse.js";
import { mountPhysicianView } from "./views/physician.js";

const baseUrl = (() => {
  // served from the gateway at /ui, or standalone against localhost
  const here = window.location;
  if (here.pathname.startsWith("/ui")) return "";
  return `${here.protocol}//${here.hostname}:8080`;
})();

const store = new Store();
let role: Role = "nurse";
let api = new ApiClient(baseUrl, role);
let unmount: (() => void) | null = null;
let stream: EventStream | null = null;

const banner = document.getElementById("banner")!;
const viewRoot = document.getElementById("view")!;
const roleSelect = document.getElementById("role") as HTMLSelectElement;

function renderBanner(): void {
  const state = store.get();
  const bits: string[] = [];
  if (state.connection === "live" && !state.stale) {
    bits.push("No new messages &middot; System is operational");
    banner.className = "banner ok";
  } else if (state.connection === "live" && state.stale) {
    bits.push("No events for over 10 s &mdash; data may be stale");
    banner.className = "banner stale";
  } else if (state.connection === "lost") {
    bits.push("Connection lost &mdash; reconnecting&hellip;");
    banner.className = "banner lost";
  } else {
    bits.push("Connecting&hellip;");
    banner.className = "banner";
  }
  if (state.kbRevision !== null) {
    bits.push(`knowledge base r${state.kbRevision}`);
  }
  banner.innerHTML = `<strong>General Notices / Alerts</strong> &mdash; ${bits.join(" &middot; ")}`;
}

function mountView(): void {
  unmount?.();
  document.body.dataset.role = role;
  unmount =
    role === "nurse"
      ? mountNurseView(viewRoot, store, api, `${role}-station`)
      : mountPhysicianView(viewRoot, store, api, `${role}-station`);
}

function startStream(): void {
  stream?.stop();
  stream = new EventStream(baseUrl, role, {
    onEvent: (event) => store.dispatch(event),
    onConnection: (connection) => store.set({ connection }),
  });
  stream.start();
}

roleSelect.addEventListener("change", () => {
  role = roleSelect.value as Role;
  api = new ApiClient(baseUrl, role);
  mountView();
  startStream();
});

store.subscribe(renderBanner);
setInterval(() => store.set((s) => markStale(s, Date.now())), 1000);

api.listAlerts().then(({ alerts }) => {
  for (const alert of alerts) store.dispatch({ type: "alert_raised", alert });
});

mountView();
startStream();
renderBanner();
