// Entry point: wire the API client, the state machine, the renderer,
// and the keyboard together under #app.

import { HttpApi } from "./api.js";
import { actionForKey, shouldIgnore } from "./keymap.js";
import { AnnotationStore, errorText } from "./store.js";
import { createToaster } from "./toast.js";
import { ViewHandlers, render } from "./view.js";

const params = new URLSearchParams(window.location.search);
const options = { debug: params.get("debug") === "1" };

const app = document.getElementById("app");
if (app === null) {
  throw new Error("#app container missing from index.html");
}
const viewRoot = document.createElement("div");
viewRoot.id = "view";
const toastRoot = document.createElement("div");
toastRoot.id = "toasts";
app.append(viewRoot, toastRoot);

const store = new AnnotationStore(new HttpApi(""), params.get("annotator") ?? undefined);
const toast = createToaster(toastRoot);

const handlers: ViewHandlers = {
  onFilterChange: (on) => store.setFilter(on),
  onSelectMatch: (matchId) => void store.selectMatch(matchId),
  onSelectMessage: (messageId) => store.selectMessage(messageId),
  onToggle: (attr) => store.toggle(attr),
  onSave: () => void store.save(),
  onClear: () => void store.clear(),
};

let cueTimer: number | undefined;

store.subscribe((event) => {
  switch (event.kind) {
    case "render":
      render(viewRoot, store, handlers, options);
      break;
    case "toast":
      toast(event.text, event.tone);
      break;
    case "cue":
      // edge-of-data flash instead of a silent dead key
      viewRoot.classList.remove("edge-cue");
      void viewRoot.offsetWidth; // restart the animation
      viewRoot.classList.add("edge-cue");
      window.clearTimeout(cueTimer);
      cueTimer = window.setTimeout(() => viewRoot.classList.remove("edge-cue"), 400);
      break;
  }
});

document.addEventListener("keydown", (event) => {
  if (shouldIgnore(event)) {
    return;
  }
  const action = actionForKey(event);
  if (action === null) {
    return;
  }
  event.preventDefault();
  void store.dispatch(action);
});

render(viewRoot, store, handlers, options);
store.init().catch((err) => toast(errorText(err), "error"));
