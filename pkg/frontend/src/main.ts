import { SessionApi } from "./api.js";
import { SessionController } from "./state.js";
import { UiShell } from "./ui.js";

const api = new SessionApi("");
const controller = new SessionController(api);
const shell = new UiShell(document, controller);
shell.bindSetupForm();
