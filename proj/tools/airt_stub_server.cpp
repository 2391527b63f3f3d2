// Minimal detection stub: answers every POST /detect with a fixed bounding
// box, so the HTTP protocol can be integration-tested with no real model.
//
//   airt_stub_server --port 8088 --bbox 10,10,20,20 --confidence 0.9

#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

int main(int argc, char** argv) {
    CLI::App app{"Fixed-box detection stub server"};
    int port = 8088;
    std::string bbox = "10,10,20,20";
    double confidence = 0.9;
    app.add_option("--port", port, "listen port");
    app.add_option("--bbox", bbox, "x1,y1,x2,y2 returned for every request");
    app.add_option("--confidence", confidence, "confidence returned for every request");
    CLI11_PARSE(app, argc, argv);

    nlohmann::json box = nlohmann::json::array();
    std::stringstream ss(bbox);
    std::string tok;
    while (std::getline(ss, tok, ',')) box.push_back(std::stod(tok));

    httplib::Server server;
    server.Post("/detect", [&](const httplib::Request& req, httplib::Response& res) {
        nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.contains("image") || !body.contains("prompt")) {
            res.status = 400;
            res.set_content("{\"error\":\"expected {image, prompt}\"}", "application/json");
            return;
        }
        nlohmann::json reply{{"bbox", box}, {"confidence", confidence}};
        res.set_content(reply.dump(), "application/json");
    });

    std::cout << "listening on 127.0.0.1:" << port << "\n";
    server.listen("127.0.0.1", port);
    return 0;
}
