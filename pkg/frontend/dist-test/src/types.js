// Wire types for the aa HTTP API.
export {};
