// Bootstrap: wire the controller to the page and poll the service.
// Served by the session service itself (xal serve --static frontend),
// so the API base is the page's own origin.

import { Api } from "./api.js";
import { SessionController } from "./controller.js";
import { DomView } from "./dom.js";

function need<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const params = new URLSearchParams(window.location.search);
const api = new Api("");

const labelNo = need<HTMLButtonElement>("label-0");
const labelYes = need<HTMLButtonElement>("label-1");
const skipButton = need<HTMLButtonElement>("skip");
const clustersButton = need<HTMLButtonElement>("show-clusters");

const view = new DomView(
  {
    card: need("card"),
    chart: need<HTMLCanvasElement>("chart"),
    toggles: need("toggles"),
    status: need("status"),
    banner: need("banner"),
    buttons: [labelNo, labelYes, skipButton],
  },
  (region) => controller.chart?.toggle(region),
);

const controller = new SessionController(api, view);

labelNo.addEventListener("click", () => void controller.label(0));
labelYes.addEventListener("click", () => void controller.label(1));
skipButton.addEventListener("click", () => void controller.skip());
clustersButton.addEventListener("click", () => {
  const session = controller.session;
  if (!session) return;
  clustersButton.disabled = true;
  api
    .clusters(session.session_id)
    .then((report) => view.renderClusters(report, need("clusters")))
    .catch((err) => view.showBanner(`cluster fetch failed: ${err}`))
    .finally(() => {
      clustersButton.disabled = false;
    });
});

function poll(): void {
  if (controller.done) return;
  void controller.tick().then(() => {
    setTimeout(poll, controller.nextDelayMs());
  });
}

const options: { preset?: string; seed?: number } = {};
const preset = params.get("preset");
if (preset) options.preset = preset;
const seed = params.get("seed");
if (seed !== null && seed !== "") options.seed = Number(seed);

controller
  .start(options)
  .then(() => poll())
  .catch((err) => view.showBanner(`could not start a session: ${err}`));
