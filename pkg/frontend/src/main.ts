/** Entry point. The service location comes from the ?service= query
 * parameter, falling back to the page's own origin for same-origin
 * deployments behind a reverse proxy. */

import { ConsoleClient } from "./api.js";
import { Console } from "./ui.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("service") ?? window.location.origin;
const root = document.getElementById("console");
if (root === null) throw new Error("missing #console mount point");

void new Console(root, new ConsoleClient(baseUrl)).start();
