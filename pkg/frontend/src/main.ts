import { ApiClient, resolveApiBase } from "./api";
import { ConsoleApp } from "./app";
import "./style.css";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");
const app = new ConsoleApp(root, new ApiClient(resolveApiBase()));
app.start();
