import { Client } from "./api.js";
import { EditorState } from "./state.js";
import { EditorView } from "./ui.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("service") ?? "http://127.0.0.1:8642";
const scenePath = params.get("scene") ?? "scenes/toy3.json";
const checkpoint = params.get("ckpt");

const state = new EditorState(new Client(base));
new EditorView(document.getElementById("editor")!, state);

const opts = checkpoint ? { checkpoint_path: checkpoint } : { scene_path: scenePath };
state.openFromPath(opts).catch((err) => {
  document.getElementById("editor")!.prepend(
    Object.assign(document.createElement("div"), {
      className: "banner",
      textContent: `failed to open session: ${err}`,
    }),
  );
});

window.addEventListener("beforeunload", () => void state.close());
