import { ApiClient } from "./api.js";
import { App } from "./app.js";

const root = document.getElementById("app");
if (root) {
  const app = new App(root, new ApiClient());
  app.start().catch(err => {
    root.textContent = `failed to start: ${err}`;
  });
}
