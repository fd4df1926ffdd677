use super::bits::BitWriter;
use super::huffman::{category, magnitude_bits, Encoder};
use super::pixels::rgb_to_ycbcr;
use super::tables::{self, HuffmanSpec, ZIGZAG_TO_NATURAL};
use super::{dct, ChromaSubsampling, PixelImage, PixelLayout, QualityFactor, QuantTable, QuantizedJpeg};
use crate::error::{invalid, Result};

/// Encoder settings beyond the quality factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncodeOptions {
    pub quality: QualityFactor,
    pub subsampling: ChromaSubsampling,
}

impl EncodeOptions {
    pub fn new(quality: QualityFactor) -> Self {
        Self { quality, subsampling: ChromaSubsampling::S444 }
    }
}

struct Plane {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Plane {
    fn at(&self, x: usize, y: usize) -> u8 {
        self.data[y.min(self.height - 1) * self.width + x.min(self.width - 1)]
    }
}

fn downsample_2x2(p: &Plane) -> Plane {
    let (w, h) = (p.width.div_ceil(2), p.height.div_ceil(2));
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let sum = u32::from(p.at(2 * x, 2 * y))
                + u32::from(p.at(2 * x + 1, 2 * y))
                + u32::from(p.at(2 * x, 2 * y + 1))
                + u32::from(p.at(2 * x + 1, 2 * y + 1));
            data.push(((sum + 2) / 4) as u8);
        }
    }
    Plane { width: w, height: h, data }
}

fn quantize_plane(plane: &Plane, table: &QuantTable, comp: &mut super::Component) {
    let steps = table.natural();
    for by in 0..comp.blocks_tall() {
        for bx in 0..comp.blocks_wide() {
            let samples: [f64; 64] =
                std::array::from_fn(|i| f64::from(plane.at(bx * 8 + i % 8, by * 8 + i / 8)) - 128.0);
            let coeffs = dct::forward(&samples);
            let block = comp.block_mut(bx, by);
            for n in 0..64 {
                let limit = if n == 0 { 2047.0 } else { 1023.0 };
                block[n] = (coeffs[n] / f64::from(steps[n])).round().clamp(-limit, limit) as i16;
            }
        }
    }
}

/// Transforms and quantizes pixels with explicit tables, grid anchored at (0, 0).
///
/// Gray images produce one component; RGB images produce YCbCr with the
/// requested chroma subsampling and `chroma` applied to both colour planes.
pub fn quantize(
    p: &PixelImage,
    luma: QuantTable,
    chroma: QuantTable,
    subsampling: ChromaSubsampling,
) -> Result<QuantizedJpeg> {
    let (w, h) = (p.width() as usize, p.height() as usize);
    match p.layout() {
        PixelLayout::Gray => {
            let plane = Plane { width: w, height: h, data: p.data().to_vec() };
            let mut j = QuantizedJpeg::new(p.width(), p.height(), &[(1, 1, 1, luma)])?;
            quantize_plane(&plane, &luma, &mut j.components_mut()[0]);
            Ok(j)
        }
        PixelLayout::Rgb => {
            let mut planes = [Vec::with_capacity(w * h), Vec::with_capacity(w * h), Vec::with_capacity(w * h)];
            for px in p.data().chunks_exact(3) {
                let (y, cb, cr) = rgb_to_ycbcr(px[0], px[1], px[2]);
                planes[0].push(y);
                planes[1].push(cb);
                planes[2].push(cr);
            }
            let [y, cb, cr] = planes.map(|data| Plane { width: w, height: h, data });
            let (luma_samp, cb, cr) = match subsampling {
                ChromaSubsampling::S444 => (1, cb, cr),
                ChromaSubsampling::S420 => (2, downsample_2x2(&cb), downsample_2x2(&cr)),
            };
            let mut j = QuantizedJpeg::new(
                p.width(),
                p.height(),
                &[(1, luma_samp, luma_samp, luma), (2, 1, 1, chroma), (3, 1, 1, chroma)],
            )?;
            for (i, (plane, table)) in [(y, luma), (cb, chroma), (cr, chroma)].into_iter().enumerate() {
                quantize_plane(&plane, &table, &mut j.components_mut()[i]);
            }
            Ok(j)
        }
    }
}

/// Compresses pixels at quality `q` (4:4:4 for colour input).
pub fn encode(p: &PixelImage, q: QualityFactor) -> Result<Vec<u8>> {
    encode_with(p, &EncodeOptions::new(q))
}

pub fn encode_with(p: &PixelImage, opts: &EncodeOptions) -> Result<Vec<u8>> {
    let (luma, chroma) = tables::quality_to_tables(opts.quality);
    emit(&quantize(p, luma, chroma, opts.subsampling)?)
}

fn put_segment(out: &mut Vec<u8>, marker: u8, payload: &[u8]) {
    out.extend_from_slice(&[0xFF, marker]);
    out.extend_from_slice(&((payload.len() + 2) as u16).to_be_bytes());
    out.extend_from_slice(payload);
}

fn dht_payload(class: u8, id: u8, spec: &HuffmanSpec) -> Vec<u8> {
    let mut p = vec![(class << 4) | id];
    p.extend_from_slice(&spec.counts);
    p.extend_from_slice(&spec.symbols);
    p
}

struct BlockCoder<'a> {
    dc: &'a Encoder,
    ac: &'a Encoder,
}

impl BlockCoder<'_> {
    fn put(&self, w: &mut BitWriter, block: &[i16; 64], pred: &mut i32) -> Result<()> {
        let diff = i32::from(block[0]) - *pred;
        *pred = i32::from(block[0]);
        let cat = category(diff);
        if cat > 11 {
            return Err(invalid(format!("DC difference {diff} exceeds baseline range")));
        }
        self.dc.put(w, cat as u8);
        w.put(magnitude_bits(diff, cat), cat);
        let mut run = 0u8;
        for k in 1..64 {
            let v = i32::from(block[ZIGZAG_TO_NATURAL[k]]);
            if v == 0 {
                run += 1;
                continue;
            }
            while run >= 16 {
                self.ac.put(w, 0xF0);
                run -= 16;
            }
            let cat = category(v);
            if cat > 10 {
                return Err(invalid(format!("AC coefficient {v} exceeds baseline range")));
            }
            self.ac.put(w, (run << 4) | cat as u8);
            w.put(magnitude_bits(v, cat), cat);
            run = 0;
        }
        if run > 0 {
            self.ac.put(w, 0x00);
        }
        Ok(())
    }
}

/// Writes a baseline JFIF stream carrying exactly the given coefficients.
///
/// The first component uses the typical luminance Huffman tables and the
/// others the chrominance ones; all components go into one interleaved scan.
pub fn emit(j: &QuantizedJpeg) -> Result<Vec<u8>> {
    let mut out = vec![0xFF, 0xD8];
    put_segment(&mut out, 0xE0, &[b'J', b'F', b'I', b'F', 0, 1, 1, 0, 0, 1, 0, 1, 0, 0]);

    let mut table_ids: Vec<QuantTable> = Vec::new();
    let mut comp_tables = Vec::new();
    for c in j.components() {
        let id = match table_ids.iter().position(|t| *t == c.table) {
            Some(id) => id,
            None => {
                table_ids.push(c.table);
                table_ids.len() - 1
            }
        };
        comp_tables.push(id as u8);
    }
    let mut dqt = Vec::new();
    for (id, t) in table_ids.iter().enumerate() {
        dqt.push(id as u8);
        dqt.extend(t.zigzag().iter().map(|&v| v as u8));
    }
    put_segment(&mut out, 0xDB, &dqt);

    let mut sof = vec![8];
    sof.extend_from_slice(&(j.height() as u16).to_be_bytes());
    sof.extend_from_slice(&(j.width() as u16).to_be_bytes());
    sof.push(j.components().len() as u8);
    for (c, &t) in j.components().iter().zip(&comp_tables) {
        sof.extend_from_slice(&[c.id, (c.h_samp << 4) | c.v_samp, t]);
    }
    if j.width() > u32::from(u16::MAX) || j.height() > u32::from(u16::MAX) {
        return Err(invalid("image dimensions exceed 65535"));
    }
    put_segment(&mut out, 0xC0, &sof);

    let (dc_l, ac_l) = (tables::std_dc_luminance(), tables::std_ac_luminance());
    let (dc_c, ac_c) = (tables::std_dc_chrominance(), tables::std_ac_chrominance());
    let mut dht = dht_payload(0, 0, &dc_l);
    dht.extend(dht_payload(1, 0, &ac_l));
    if j.components().len() > 1 {
        dht.extend(dht_payload(0, 1, &dc_c));
        dht.extend(dht_payload(1, 1, &ac_c));
    }
    put_segment(&mut out, 0xC4, &dht);

    let mut sos = vec![j.components().len() as u8];
    for (i, c) in j.components().iter().enumerate() {
        sos.extend_from_slice(&[c.id, if i == 0 { 0x00 } else { 0x11 }]);
    }
    sos.extend_from_slice(&[0, 63, 0]);
    put_segment(&mut out, 0xDA, &sos);

    let (enc_dc_l, enc_ac_l) = (Encoder::new(&dc_l), Encoder::new(&ac_l));
    let (enc_dc_c, enc_ac_c) = (Encoder::new(&dc_c), Encoder::new(&ac_c));
    let coders: Vec<BlockCoder<'_>> = (0..j.components().len())
        .map(|i| {
            if i == 0 {
                BlockCoder { dc: &enc_dc_l, ac: &enc_ac_l }
            } else {
                BlockCoder { dc: &enc_dc_c, ac: &enc_ac_c }
            }
        })
        .collect();

    let mut w = BitWriter::default();
    let mut preds = vec![0i32; j.components().len()];
    if j.components().len() == 1 {
        let comp = &j.components()[0];
        for block in comp.blocks() {
            coders[0].put(&mut w, block, &mut preds[0])?;
        }
    } else {
        let (h_max, v_max) = j.max_sampling();
        let mcus_x = (j.width() as usize).div_ceil(8 * h_max as usize);
        let mcus_y = (j.height() as usize).div_ceil(8 * v_max as usize);
        for my in 0..mcus_y {
            for mx in 0..mcus_x {
                for (ci, comp) in j.components().iter().enumerate() {
                    let (h, v) = (comp.h_samp as usize, comp.v_samp as usize);
                    for dy in 0..v {
                        for dx in 0..h {
                            let (bx, by) = (mx * h + dx, my * v + dy);
                            if bx < comp.blocks_wide() && by < comp.blocks_tall() {
                                coders[ci].put(&mut w, comp.block(bx, by), &mut preds[ci])?;
                            } else {
                                // MCU padding: repeat the nearest in-grid DC
                                let edge = comp.block(bx.min(comp.blocks_wide() - 1), by.min(comp.blocks_tall() - 1));
                                let mut pad = [0i16; 64];
                                pad[0] = edge[0];
                                coders[ci].put(&mut w, &pad, &mut preds[ci])?;
                            }
                        }
                    }
                }
            }
        }
    }
    out.extend(w.into_bytes());
    out.extend_from_slice(&[0xFF, 0xD9]);
    Ok(out)
}

/// Inserts a COM segment right after SOI.
pub fn with_comment(jpeg: &[u8], text: &str) -> Result<Vec<u8>> {
    if jpeg.len() < 2 || jpeg[..2] != [0xFF, 0xD8] {
        return Err(crate::error::invalid("not a JPEG stream"));
    }
    let len = u16::try_from(text.len() + 2).map_err(|_| crate::error::invalid("comment too long"))?;
    let mut out = Vec::with_capacity(jpeg.len() + text.len() + 4);
    out.extend_from_slice(&jpeg[..2]);
    out.extend_from_slice(&[0xFF, 0xFE]);
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(text.as_bytes());
    out.extend_from_slice(&jpeg[2..]);
    Ok(out)
}
