/** Where the test service listens; shared by setup and integration tests. */
export const SERVICE_PORT = 8719;
export const SERVICE_URL = `http://127.0.0.1:${SERVICE_PORT}`;
