import { SearchClient } from "./api.js";
import { createApp } from "./app.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");
// Same-origin by default: the bundle is served from the API's /ui mount.
createApp(root, new SearchClient(""));
