// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <iostream>

#include "commands.hpp"
#include "manifest.hpp"
#include "table.hpp"
#include "tworay/channel.hpp"

namespace tworay::cli {

int cmd_synth(const SynthOptions& o, const std::vector<std::string>& argv) {
    Scenario kind;
    try {
        kind = parse_scenario(o.scenario);
    } catch (const std::invalid_argument& e) {
        std::cerr << "synth: " << e.what() << '\n';
        return kExitInput;
    }
    const std::filesystem::path dir(o.out_dir);
    nlohmann::json opts = {{"scenario", o.scenario}, {"seed", o.seed}, {"text", o.text}};
    Manifest manifest("synth", argv, opts);

    const auto set = synth_scenario(kind, o.seed);
    std::filesystem::create_directories(dir);
    const auto bin = dir / (std::string(to_string(kind)) + ".twch");
    write_channel_set(bin.string(), set);
    manifest.add_output(bin);

    if (o.text) {
        const auto csv = dir / (std::string(to_string(kind)) + ".csv");
        std::ofstream out(csv);
        write_csv_row(out, {"channel", "frequency_hz", "re", "im"});
        for (const auto& ch : set) {
            const std::string label = ch.meta.key.label();
            for (std::size_t i = 0; i < ch.h.size(); ++i)
                write_csv_row(out, {label, format_double(ch.grid.frequency(i)),
                                    format_double(ch.h[i].real()), format_double(ch.h[i].imag())});
        }
        if (!out) throw std::runtime_error("cannot write " + csv.string());
        manifest.add_output(csv);
    }
    manifest.set("channels", set.size());
    manifest.write(dir, kExitOk);
    std::cout << bin.string() << ": " << set.size() << " channels, " << set.front().h.size()
              << " points\n";
    return kExitOk;
}

}  // namespace tworay::cli
