export * from "./protocol.js";
export * from "./viewmodel.js";
export * from "./button.js";
export * from "./layout.js";
export * from "./render.js";
export * from "./client.js";
