//! Companion gnuplot scripts for the data files. Each script reads its CSV
//! from the working directory and writes a PNG next to it.

const PREAMBLE: &str = "set datafile separator ','\nset key autotitle columnhead\nset grid\nset terminal pngcairo size 900,600\n";

fn script(output: &str, body: &str) -> String {
    format!("{PREAMBLE}set output '{output}'\n{body}")
}

pub fn atom() -> String {
    script(
        "atom.png",
        "set multiplot layout 1,2\n\
         set xlabel 'd1 [mm]'\n\
         set ylabel '|T| [dB]'\n\
         set y2label 'phase [deg]'\n\
         set y2tics\n\
         plot 'atom_response.csv' using ($1*1e3):(20*log10($2)) with lines title '|T_TE|', \\\n\
         \x20    '' using ($1*1e3):3 axes x1y2 with lines title 'phase TE'\n\
         unset y2label\n\
         unset y2tics\n\
         set ylabel 'T_atom'\n\
         plot 'transparency_vs_d1.csv' using 1:3 with lines title 'optical transmittance'\n\
         unset multiplot\n",
    )
}

pub fn convergence() -> String {
    script(
        "convergence.png",
        "set xlabel 'iteration'\nset ylabel 'best upsilon'\nset logscale y\n\
         plot 'convergence.csv' using 1:2 with steps notitle\n",
    )
}

pub fn layout() -> String {
    script(
        "layout.png",
        "set multiplot layout 1,2\n\
         set view map\n\
         set xlabel 'q'\nset ylabel 'p'\n\
         set title 'd1 [mm]'\n\
         plot 'transparency_map.csv' using 2:1:3 with image notitle\n\
         set title 'T_atom'\n\
         plot 'transparency_map.csv' using 2:1:4 with image notitle\n\
         unset multiplot\n",
    )
}

pub fn pattern_cut() -> String {
    script(
        "pattern.png",
        "set xlabel 'theta [deg]'\nset ylabel 'power [dB]'\n\
         plot 'pattern.csv' using 1:9 with lines notitle\n",
    )
}

pub fn pattern_uv(samples: usize) -> String {
    let step = 2.0 / (samples.max(2) - 1) as f64;
    script(
        "pattern_uv.png",
        &format!(
            "set size ratio -1\nset xlabel 'u'\nset ylabel 'v'\nset cblabel 'power [dB]'\n\
             plot 'pattern_uv.csv' using 3:4:9 with points pt 5 ps {:.3} palette notitle\n",
            (step * 40.0).max(0.1)
        ),
    )
}

pub fn aperture_sweep() -> String {
    script(
        "aperture_sweep.png",
        "set xlabel 'P'\nset ylabel 'Xi [dB]'\nset key left top\n\
         plot 'aperture_sweep.csv' using 1:2 with linespoints, '' using 1:3 with linespoints, \
         '' using 1:4 with linespoints\n",
    )
}

pub fn angle_sweep() -> String {
    script(
        "angle_sweep.png",
        "set xlabel 'theta_rx [deg]'\nset ylabel 'Xi [dB]'\nset xrange [*:*] reverse\n\
         plot 'angle_sweep.csv' using 1:2 with linespoints\n",
    )
}
