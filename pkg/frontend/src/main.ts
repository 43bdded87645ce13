import { ApiClient } from "./api.js";
import { Panel } from "./panel.js";

const root = document.getElementById("app");
if (root) {
    new Panel(new ApiClient(""), root).start().catch((err) => {
        root.textContent = `failed to reach the relighting service: ${err}`;
    });
}
