/** Browser entry point: mount the app on #app and resume from the URL hash. */

import { AdvisorClient } from "./api.js";
import { AdvisorApp } from "./app.js";

declare global {
  interface Window {
    ADVISOR_API?: string;
  }
}

const base = window.ADVISOR_API ?? "http://127.0.0.1:8000";
const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}
const app = new AdvisorApp(root, new AdvisorClient(base));
const sessionId = window.location.hash.replace(/^#/, "") || undefined;
void app.start(sessionId);
